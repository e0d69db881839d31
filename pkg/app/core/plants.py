"""Built-in plants addressable by name, with closed-form storage functions."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from app.core.factorization import lti_normalized_pair, normalize_sir, normalize_skr
from app.core.systems import lift_lti
from app.errors import ConfigInvalid
from app.models.realizations import SirRealization, SkrRealization, StorageFunction
from app.models.systems import AffineSystem, LtiSystem

SQRT2 = np.sqrt(2.0)
_ZERO_1x1 = np.zeros((1, 1))
_ONE_1x1 = np.ones((1, 1))


@dataclass(frozen=True)
class PlantBundle:
    name: str
    system: AffineSystem
    sir_storage: Optional[StorageFunction] = None
    skr_storage: Optional[StorageFunction] = None
    skr_gain: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lti: Optional[LtiSystem] = None


# ==================== SCALAR LTI ====================
def scalar_lti() -> PlantBundle:
    """dx/dt = -x + u, y = x."""
    lti = LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]])
    x_gain = SQRT2 - 1.0
    v_gain = SQRT2 + 1.0
    return PlantBundle(
        name="scalar_lti",
        system=lift_lti(lti, name="scalar_lti"),
        sir_storage=StorageFunction(
            value=lambda x: 0.5 * x_gain * float(x[0]) ** 2,
            gradient=lambda x: x_gain * np.asarray(x, dtype=float),
            name="scalar_lti:P",
        ),
        skr_storage=StorageFunction(
            value=lambda x: 0.5 * v_gain * float(x[0]) ** 2,
            gradient=lambda x: v_gain * np.asarray(x, dtype=float),
            name="scalar_lti:V",
        ),
        skr_gain=lambda x: np.array([[x_gain]]),
        lti=lti,
    )


# ==================== SCALAR CUBIC ====================
def _cubic_terms(x: np.ndarray) -> tuple[float, float, float]:
    value = float(x[0])
    q = 1.0 + value * value
    return value, q, np.sqrt(q * q + 1.0)


def _cubic_p_value(x):
    _, q, s = _cubic_terms(x)
    # 1/4 [q s - q^2 + asinh q] from q = 1, with q s - q^2 = q / (s + q)
    return 0.25 * (q / (s + q) + np.arcsinh(q)) - 0.25 * (1.0 / (SQRT2 + 1.0) + np.arcsinh(1.0))


def _cubic_p_gradient(x):
    value, q, s = _cubic_terms(x)
    return np.array([value / (s + q)])


def _cubic_v_value(x):
    _, q, s = _cubic_terms(x)
    return 0.25 * (q * q + q * s + np.arcsinh(q)) - 0.25 * (1.0 + SQRT2 + np.arcsinh(1.0))


def _cubic_v_gradient(x):
    value, q, s = _cubic_terms(x)
    return np.array([value * (q + s)])


def _cubic_gain(x):
    _, q, s = _cubic_terms(x)
    return np.array([[1.0 / (q + s)]])


def scalar_cubic() -> PlantBundle:
    """dx/dt = -x - x^3 + u, y = x."""
    system = AffineSystem(
        n=1,
        p=1,
        m=1,
        a=lambda x: -x - x ** 3,
        B=lambda x: _ONE_1x1,
        c=lambda x: np.array(x, dtype=float),
        D=lambda x: _ZERO_1x1,
        jac_a=lambda x: np.array([[-1.0 - 3.0 * float(x[0]) ** 2]]),
        jac_c=lambda x: _ONE_1x1,
        dB=lambda x, u: _ZERO_1x1,
        dD=lambda x, u: _ZERO_1x1,
        name="scalar_cubic",
    )
    return PlantBundle(
        name="scalar_cubic",
        system=system,
        sir_storage=StorageFunction(_cubic_p_value, _cubic_p_gradient, name="scalar_cubic:P"),
        skr_storage=StorageFunction(_cubic_v_value, _cubic_v_gradient, name="scalar_cubic:V"),
        skr_gain=_cubic_gain,
    )


# ==================== REGISTRY ====================
def lti_custom(A, B, C, D) -> PlantBundle:
    try:
        lti = LtiSystem(A=A, B=B, C=C, D=D)
    except Exception as exc:
        raise ConfigInvalid(f"invalid inline matrices: {exc}") from exc
    return PlantBundle(name="lti_custom", system=lift_lti(lti, name="lti_custom"), lti=lti)


BUILTIN_PLANTS = {
    "scalar_lti": scalar_lti,
    "scalar_cubic": scalar_cubic,
}


def get_plant(name: str, matrices: Optional[dict] = None) -> PlantBundle:
    if name == "lti_custom":
        if not matrices:
            raise ConfigInvalid("lti_custom needs inline matrices A, B, C, D")
        return lti_custom(**{key: matrices[key] for key in ("A", "B", "C", "D")})
    if name not in BUILTIN_PLANTS:
        raise ConfigInvalid(f"unknown plant '{name}'", {"known": sorted([*BUILTIN_PLANTS, "lti_custom"])})
    return BUILTIN_PLANTS[name]()


def normalized_pair(bundle: PlantBundle) -> tuple[SirRealization, SkrRealization]:
    """Normalized SIR and SKR for a plant bundle."""
    if bundle.lti is not None:
        sir, skr, _ = lti_normalized_pair(bundle.lti, name=bundle.name)
        return sir, skr
    if bundle.sir_storage is None or bundle.skr_storage is None or bundle.skr_gain is None:
        raise ConfigInvalid(f"plant '{bundle.name}' has no storage functions")
    sir = normalize_sir(bundle.system, bundle.sir_storage)
    skr = normalize_skr(bundle.system, bundle.skr_storage, bundle.skr_gain)
    return sir, skr
