"""UAV-assisted vehicular MEC simulator and multi-agent schedulers."""
