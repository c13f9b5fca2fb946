import math

from pydantic import BaseModel, ConfigDict, Field, model_validator


# ============ Radio Schemas ============

class RadioConfig(BaseModel):
    """Physical-layer constants shared by the BS and UAV links"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    bandwidth_bs: float = Field(10e6, gt=0, description="Total BS bandwidth W_BS (Hz)")
    max_subchannels: int = Field(10, ge=1, description="Subchannel cap X of the BS")
    noise_density: float = Field(1e-3, gt=0, description="AWGN density n0 of the BS link (W/Hz)")
    tx_power: float = Field(4000.0, gt=0, description="Transmit power p_t (W)")
    channel_power: float = Field(40.0, gt=0, description="Channel power factor p_c (dimensionless)")
    los_b1: float = Field(0.36, gt=0)
    los_b2: float = Field(0.21, gt=0)
    los_offset: float = Field(0.0, ge=0, lt=90, description="Elevation offset zeta (degrees)")
    path_loss_exp: float = Field(2.0, gt=0)
    atten_los: float = Field(1.0, ge=1)
    atten_nlos: float = Field(20.0, ge=1)
    carrier_freq: float = Field(2e9, gt=0, description="Carrier frequency f_c (Hz)")
    light_speed: float = Field(3e8, gt=0)
    snr_threshold: float = Field(1.0, ge=0, description="Minimum SNR for a successful transmission")
    bs_height: float = Field(25.0, gt=0)
    uav_height: float = Field(100.0, gt=0)

    # Air-to-ground link
    bandwidth_uav: float = Field(10e6, gt=0, description="Bandwidth each UAV splits across its cluster (Hz)")
    uav_noise_density: float = Field(1e-12, gt=0, description="AWGN density of the UAV link (W/Hz)")

    @model_validator(mode="after")
    def _check_attenuation_order(self) -> "RadioConfig":
        if self.atten_nlos < self.atten_los:
            raise ValueError("atten_nlos must be >= atten_los")
        return self

    @property
    def k0(self) -> float:
        """Free-space constant (2*pi*f_c/c)^2"""
        return (2.0 * math.pi * self.carrier_freq / self.light_speed) ** 2
