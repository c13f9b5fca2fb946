"""
Generate a larger trace-driven scenario (traces.csv + network.json) next to the
bundled 3x3 example in data/example/
"""
import argparse
import logging
from pathlib import Path

from dotenv import load_dotenv

from uavmec.services.trace_io import save_network, write_traces
from uavmec.services.traffic import build_grid_network, generate_grid_traces, shortage_report

load_dotenv()

EXAMPLE_DIR = Path(__file__).resolve().parent.parent / "data" / "example" / "grid10"


def create_example_scenario(out_dir: Path, rows: int, cols: int, vehicles: int, horizon: int, seed: int) -> None:
    """Generate grid traces and the matching lane network, then report congested slots"""
    frames = generate_grid_traces(rows, cols, vehicles, horizon, seed)
    network = build_grid_network(rows, cols)
    traces_path = write_traces(frames, out_dir / "traces.csv")
    network_path = save_network(network, out_dir / "network.json")
    print(f"✅ Wrote {len(frames)} slots of {vehicles} vehicles to {traces_path}")
    print(f"✅ Wrote {len(network.lanes)} lanes to {network_path}")

    report = shortage_report(frames, network, threshold=0.05)
    if report:
        print(f"🔍 {len(report)} of {len(frames)} slots have a block above 0.05 vehicles/m")
    else:
        print("🔍 No congested blocks at 0.05 vehicles/m")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=EXAMPLE_DIR)
    parser.add_argument("--rows", type=int, default=10)
    parser.add_argument("--cols", type=int, default=10)
    parser.add_argument("--vehicles", type=int, default=100)
    parser.add_argument("--horizon", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    print("Creating example scenario...\n")
    create_example_scenario(args.out, args.rows, args.cols, args.vehicles, args.horizon, args.seed)
