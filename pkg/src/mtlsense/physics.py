"""Two-site Stern-Volmer phase-shift model for frequency-domain oxygen sensing.

The measured feature at modulation frequency ``omega`` is the ratio

    r(omega, T, O2) = tan(theta) / tan(theta at O2 = 0)
                    = f / (1 + K1*O2) + (1 - f) / (1 + K2*O2)

with the unquenched fraction ``f`` and the Stern-Volmer constants ``K1``,
``K2`` depending on temperature and (weakly, log-linearly) on frequency.
tan(theta0)/tan(theta) is the inverse of the two-site sum, so r lies in
(0, 1] and falls with increasing oxygen.

Temperature laws are linear in ``T - t_ref``; frequency laws are linear in
``ln(omega / omega_ref)`` where ``omega_ref`` is the geometric mean of the
configured frequencies.  With all ``*_wc`` coefficients at zero the ratio is
frequency independent.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

N_FREQUENCIES = 16
T_MIN, T_MAX = 5.0, 45.0


def default_omegas() -> tuple[float, ...]:
    """Sixteen log-spaced angular frequencies, 2*pi*500 to 2*pi*20000 rad/s."""
    return tuple(2.0 * np.pi * np.geomspace(500.0, 20000.0, N_FREQUENCIES))


@dataclass(frozen=True)
class PhysicsParams:
    omegas: tuple[float, ...] = field(default_factory=default_omegas)
    tau0_ref: float = 30e-6
    tau0_tc: float = -0.005
    f_ref: float = 0.85
    f_tc: float = -0.002
    f_wc: float = 0.05
    ksv1_ref: float = 0.06
    ksv1_tc: float = 0.01
    ksv1_wc: float = 0.1
    ksv2_ref: float = 0.006
    ksv2_tc: float = 0.01
    ksv2_wc: float = -0.1
    t_ref: float = 25.0

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        w = np.asarray(self.omegas)
        if len(w) != N_FREQUENCIES:
            raise ValueError(f"expected {N_FREQUENCIES} frequencies, got {len(w)}")
        if np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise ValueError("omegas must be positive and strictly increasing")
        self.validate()

    @property
    def omega_ref(self) -> float:
        return float(np.exp(np.mean(np.log(self.omegas))))

    def _dt(self, temp):
        return np.asarray(temp, dtype=float) - self.t_ref

    def _du(self, omega):
        return np.log(np.asarray(omega, dtype=float) / self.omega_ref)

    def tau0(self, temp):
        return self.tau0_ref * (1.0 + self.tau0_tc * self._dt(temp))

    def f(self, omega, temp):
        return self.f_ref * (1.0 + self.f_tc * self._dt(temp)) * (1.0 + self.f_wc * self._du(omega))

    def ksv1(self, omega, temp):
        return self.ksv1_ref * (1.0 + self.ksv1_tc * self._dt(temp)) * (1.0 + self.ksv1_wc * self._du(omega))

    def ksv2(self, omega, temp):
        return self.ksv2_ref * (1.0 + self.ksv2_tc * self._dt(temp)) * (1.0 + self.ksv2_wc * self._du(omega))

    def validate(self) -> None:
        """Check positivity/ordering constraints at the corners of the domain.

        All laws are monotone in T and in ln(omega), so the extremes are
        attained at the corners of [T_MIN, T_MAX] x [omega_1, omega_16].
        """
        w = np.array([self.omegas[0], self.omegas[-1]])[:, None]
        t = np.array([T_MIN, T_MAX])[None, :]
        if np.any(self.tau0(t) <= 0):
            raise ValueError("tau0 must stay positive on [5, 45] degC")
        f = self.f(w, t)
        if np.any(f <= 0) or np.any(f > 1):
            raise ValueError("f must stay within (0, 1] on the supported domain")
        k1, k2 = self.ksv1(w, t), self.ksv2(w, t)
        if np.any(k1 < 0) or np.any(k2 < 0):
            raise ValueError("Stern-Volmer constants must be non-negative")
        if np.any(k1 < k2):
            raise ValueError("K_SV1 must dominate K_SV2 (site 1 is the strongly quenched one)")

    def to_dict(self) -> dict:
        return {fl.name: getattr(self, fl.name) for fl in fields(self)}

    def save(self, path) -> None:
        lines = ["# two-site Stern-Volmer parameters"]
        for key, value in self.to_dict().items():
            if key == "omegas":
                value = ",".join(repr(w) for w in value)
            else:
                value = repr(value)
            lines.append(f"{key} = {value}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_mapping(cls, mapping) -> "PhysicsParams":
        names = {fl.name for fl in fields(cls)}
        unknown = set(mapping) - names
        if unknown:
            raise KeyError(f"unknown physics parameter(s): {sorted(unknown)}")
        kwargs = {}
        for key, value in mapping.items():
            if key == "omegas":
                if isinstance(value, str):
                    value = [float(v) for v in value.split(",") if v.strip()]
                kwargs[key] = tuple(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "PhysicsParams":
        return cls.from_mapping(read_keyvalue(path))


def read_keyvalue(path) -> dict[str, str]:
    """Read a sectionless ``key = value`` file ('#' comments allowed)."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string("[root]\n" + Path(path).read_text())
    return dict(parser["root"])


def tan_theta_ratio(params: PhysicsParams, omega, temp, o2):
    """Return r = tan(theta(omega, T, O2)) / tan(theta(omega, T, 0)).

    Broadcasts over array arguments.  ``o2`` is in % air, ``temp`` in degC.
    """
    o2 = np.asarray(o2, dtype=float)
    if np.any(o2 < 0):
        raise ValueError("oxygen concentration must be non-negative")
    f = params.f(omega, temp)
    if np.any(f <= 0) or np.any(f > 1):
        raise ValueError("unquenched fraction f left (0, 1]")
    k1 = params.ksv1(omega, temp)
    k2 = params.ksv2(omega, temp)
    r = f / (1.0 + k1 * o2) + (1.0 - f) / (1.0 + k2 * o2)
    return float(r) if np.ndim(r) == 0 else r


def phase_shift(params: PhysicsParams, omega, temp, o2):
    """Phase angle theta in radians, using tan(theta0) = omega * tau0(T)."""
    tan0 = np.asarray(omega, dtype=float) * params.tau0(temp)
    return np.arctan(tan0 * tan_theta_ratio(params, omega, temp, o2))


def feature_vector(params: PhysicsParams, temp, o2) -> np.ndarray:
    """The 16 r-ratios for one observation, or an (n, 16) block for arrays."""
    temp = np.asarray(temp, dtype=float)
    o2 = np.asarray(o2, dtype=float)
    omegas = np.asarray(params.omegas)
    return tan_theta_ratio(params, omegas, temp[..., None], o2[..., None])
