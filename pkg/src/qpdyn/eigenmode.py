"""Slowest diffusion-trapping eigenmode of the electrode network.

With N_L, N_R vortices of trapping power P (m^2/s) in the two pads, QP
density decays as exp(-s t) in a spatial mode x ~ cos(k y) per segment,
with s = D k^2 + s0.  The admissible k (dimensionless z = k L) solves a
transcendental compatibility equation of the wire network; this module
evaluates that equation, finds its smallest positive root with a
pole-aware bracket scan, and provides the closed-form weak- and
strong-trapping limits, the quantized vortex-step sequence, and
field-sweep predictions.

Dimensionless groups: eps = P * tau_D / A_W measures trapping strength;
a = S_pad / A_W the pad-to-wire area ratio; nbar = (N_L + N_R)/2 and
dN = N_R - N_L enter the equation only as nbar and dN^2, so s is exactly
symmetric under pad exchange.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameterError, NoRootFoundError
from .geometry import DeviceGeometry, derive


@dataclass(frozen=True)
class VortexConfig:
    """Vortex counts per pad and the per-vortex trapping power P (m^2/s)."""

    n_left: int
    n_right: int
    trapping_power: float

    def __post_init__(self):
        if self.n_left < 0 or self.n_right < 0 \
                or self.n_left != int(self.n_left) \
                or self.n_right != int(self.n_right):
            raise InvalidParameterError(
                f"vortex counts must be non-negative integers, got "
                f"({self.n_left}, {self.n_right})")
        if not (self.trapping_power >= 0):
            raise InvalidParameterError(
                f"trapping_power must be >= 0, got {self.trapping_power}")


@dataclass(frozen=True)
class TransportParams:
    """Diffusion constant D (m^2/s) and homogeneous background trapping s0 (1/s)."""

    d: float
    s0: float = 0.0

    def __post_init__(self):
        if not (self.d > 0):
            raise InvalidParameterError(f"D must be > 0, got {self.d}")
        if not (self.s0 >= 0):
            raise InvalidParameterError(f"s0 must be >= 0, got {self.s0}")


@dataclass(frozen=True)
class ModeSolution:
    """Smallest root z of the mode equation and the rate s = z^2/tau_D + s0.

    residual_at_root is the Newton-normalized residual R/(R' z), i.e. the
    estimated relative error of the root location; bracket is the scan
    interval the root was isolated in.
    """

    z: float
    s: float
    bracket: tuple[float, float]
    residual_at_root: float
    branch_note: str


def capacitor_substitution(z, geom: DeviceGeometry):
    """Effective tan of the composite capacitor plate (thin arm + wide arm).

    Replaces tan(z h/L) of a plain thin arm by

        [cos(z Lc/L) sin(z h/L) + (Wc/W) sin(z Lc/L) cos(z h/L)]
        / [cos(z Lc/L) cos(z h/L) - (Wc/W) sin(z Lc/L) sin(z h/L)]

    which reduces to tan(z h/L) at Lc = 0 and to tan(z (h+Lc)/L) at
    Wc = W.  The denominator crosses zero at the plate resonances; the
    value there is an IEEE infinity, not an error -- root finding must
    bracket around those poles (see capacitor_denominator).
    """
    zz = np.asarray(z, dtype=float)
    beta = geom.l_cap / geom.l_wire
    eta = geom.h_cap / geom.l_wire
    w = geom.w_cap / geom.w_wire
    num = np.cos(zz * beta) * np.sin(zz * eta) \
        + w * np.sin(zz * beta) * np.cos(zz * eta)
    den = np.cos(zz * beta) * np.cos(zz * eta) \
        - w * np.sin(zz * beta) * np.sin(zz * eta)
    with np.errstate(divide="ignore"):
        out = num / den
    return float(out) if np.isscalar(z) else out


def capacitor_denominator(z, geom: DeviceGeometry):
    """Denominator of capacitor_substitution; its zeros are pole locations."""
    zz = np.asarray(z, dtype=float)
    beta = geom.l_cap / geom.l_wire
    eta = geom.h_cap / geom.l_wire
    w = geom.w_cap / geom.w_wire
    out = np.cos(zz * beta) * np.cos(zz * eta) \
        - w * np.sin(zz * beta) * np.sin(zz * eta)
    return float(out) if np.isscalar(z) else out


def _groups(geom: DeviceGeometry, vortices: VortexConfig,
            tp: TransportParams):
    der = derive(geom, tp.d)
    eps = vortices.trapping_power * der.tau_d / der.a_w
    nbar = 0.5 * (vortices.n_left + vortices.n_right)
    dn = vortices.n_right - vortices.n_left
    return der, eps, nbar, dn


def _residual_terms(z: float, geom: DeviceGeometry, vortices: VortexConfig,
                    tp: TransportParams, form: str):
    """Residual of the mode equation and a local magnitude scale.

    form 'reduced' is the central-wire-length -> 0 equation; 'full'
    retains the finite half-gap l.  The scale is the sum of absolute
    values of the additive terms, for judging how small a residual is
    meaningful at this z.
    """
    der, eps, nbar, dn = _groups(geom, vortices, tp)
    a = der.aspect_a
    tz = math.tan(z)
    t_cap = capacitor_substitution(z, geom)
    q = a * z * z - nbar * eps
    half_dn = 0.5 * dn * eps
    if form == "reduced":
        f1 = z - tz * q
        f2 = z * (tz + 2.0 * t_cap) + q * (1.0 - 2.0 * t_cap * tz)
        cross = half_dn**2 * tz * (1.0 - 2.0 * t_cap * tz)
        resid = f1 * f2 + cross
        scale = abs(f1 * f2) + abs(cross)
        return resid, max(scale, 1e-300)
    if form == "full":
        lam = geom.l_half_gap / geom.l_wire
        tl = math.tan(z * lam)
        cl = 1.0 / tl if tl != 0 else math.inf
        f = 0.5 * tl - 0.5 * cl + 2.0 * t_cap
        g1 = z * (tz + f) + q * (1.0 - tz * f)
        term1 = g1 * g1
        term2 = half_dn**2 * (1.0 - tz * f) ** 2
        inner = (z - tz * q) ** 2 - half_dn**2 * tz * tz
        term3 = 0.25 * (tl + cl) ** 2 * inner
        resid = term1 - term2 - term3
        scale = abs(term1) + abs(term2) + abs(term3)
        return resid, max(scale, 1e-300)
    raise InvalidParameterError(f"form must be 'reduced' or 'full', got {form!r}")


def eigen_residual(z: float, geom: DeviceGeometry, vortices: VortexConfig,
                   tp: TransportParams, form: str = "reduced") -> float:
    """Evaluate the mode equation residual at z (zero at admissible modes)."""
    if z < 0:
        raise InvalidParameterError(f"z must be >= 0, got {z}")
    return _residual_terms(z, geom, vortices, tp, form)[0]


def _pole_positions(geom: DeviceGeometry, z_max: float, form: str):
    """All residual poles in (0, z_max): tan z, capacitor, central-wire tans."""
    poles = []
    # tan(z)
    p = 0.5 * math.pi
    while p < z_max:
        poles.append(p)
        p += math.pi
    # capacitor denominator zeros, located by scan + bisection
    scales = (geom.h_cap + geom.l_cap) / geom.l_wire + 1.0
    step = 0.5 * math.pi / scales / 8.0
    zs = np.arange(step, z_max, step)
    if zs.size:
        dvals = capacitor_denominator(zs, geom)
        prev_z, prev_d = 1e-12, capacitor_denominator(1e-12, geom)
        for zv, dv in zip(zs, dvals):
            if prev_d == 0 or prev_d * dv < 0:
                poles.append(brentq(capacitor_denominator, prev_z, zv,
                                    args=(geom,), xtol=1e-14))
            prev_z, prev_d = zv, dv
    if form == "full":
        lam = geom.l_half_gap / geom.l_wire
        p = 0.5 * math.pi / lam
        while p < z_max:
            poles.append(p)
            p += math.pi / lam
        p = math.pi / lam  # cot poles
        while p < z_max:
            poles.append(p)
            p += math.pi / lam
    return sorted(poles)


def _pole_indicators(z: float, geom: DeviceGeometry, form: str):
    """Signs of every denominator whose zero is a residual pole."""
    out = [math.cos(z), capacitor_denominator(z, geom)]
    if form == "full":
        lam = geom.l_half_gap / geom.l_wire
        out.extend([math.cos(z * lam), math.sin(z * lam)])
    return out


def _same_branch(za: float, zb: float, geom: DeviceGeometry,
                 form: str) -> bool:
    ia = _pole_indicators(za, geom, form)
    ib = _pole_indicators(zb, geom, form)
    return all(a * b > 0 for a, b in zip(ia, ib))


def _symmetric_factors(z: float, geom: DeviceGeometry,
                       vortices: VortexConfig, tp: TransportParams,
                       form: str):
    """The two factors whose product is the residual when N_L = N_R.

    With equal pads the cross term vanishes and the equation factorizes
    exactly (for the full form as a difference of squares); the symmetric
    and antisymmetric mode branches can then be rooted independently,
    which stays robust when the two branches nearly cross.
    """
    der, eps, nbar, _ = _groups(geom, vortices, tp)
    tz = math.tan(z)
    t_cap = capacitor_substitution(z, geom)
    q = der.aspect_a * z * z - nbar * eps
    f1 = z - tz * q
    f2 = z * (tz + 2.0 * t_cap) + q * (1.0 - 2.0 * t_cap * tz)
    if form == "reduced":
        return f1, f2
    lam = geom.l_half_gap / geom.l_wire
    tl = math.tan(z * lam)
    cl = 1.0 / tl if tl != 0 else math.inf
    f = 0.5 * tl - 0.5 * cl + 2.0 * t_cap
    g1 = z * (tz + f) + q * (1.0 - tz * f)
    half = 0.5 * (tl + cl)
    return g1 - half * f1, g1 + half * f1


def _first_root(fn, geom: DeviceGeometry, form: str, poles, step: float,
                z_cap: float):
    """Smallest positive root of fn in (0, z_cap), or None.

    Scans each inter-pole interval; a sign change whose bracket stays on
    one branch of every tan factor is polished with Brent's method.  Deep
    local minima of |fn| (two roots closer than the scan step) get a local
    rescan before moving on.
    """
    edges = [0.0] + [p for p in poles if p < z_cap] + [z_cap]

    def polish(za, zb):
        if not _same_branch(za, zb, geom, form):
            # an unlisted pole sneaked inside: resolve it locally
            fine = np.linspace(za, zb, 33)
            fvals = [fn(z) for z in fine]
            for k in range(32):
                if fvals[k] * fvals[k + 1] < 0 and _same_branch(
                        fine[k], fine[k + 1], geom, form):
                    return brentq(fn, fine[k], fine[k + 1], xtol=1e-15,
                                  rtol=4 * np.finfo(float).eps, maxiter=200)
            return None
        return brentq(fn, za, zb, xtol=1e-15,
                      rtol=4 * np.finfo(float).eps, maxiter=200)

    for lo, hi in zip(edges[:-1], edges[1:]):
        guard = max(1e-12, (hi - lo) * 1e-10)
        z_lo = max(lo + guard, 1e-9)
        z_hi = hi - guard
        if z_hi <= z_lo:
            continue
        n_sub = max(64, int(math.ceil((z_hi - z_lo) / step)))
        zs = np.linspace(z_lo, z_hi, n_sub + 1)
        vals = [fn(z) for z in zs]
        for j in range(n_sub):
            va, vb = vals[j], vals[j + 1]
            if not (math.isfinite(va) and math.isfinite(vb)):
                continue
            if j > 0 and math.isfinite(vals[j - 1]) and va != 0.0 \
                    and vals[j - 1] * va > 0 and va * vb > 0 \
                    and abs(va) < 0.3 * min(abs(vals[j - 1]), abs(vb)):
                # dip: a root pair may hide between samples
                sub = np.linspace(zs[j - 1], zs[j + 1], 129)
                svals = [fn(z) for z in sub]
                for k in range(128):
                    if svals[k] == 0.0:
                        return sub[k], (sub[k], sub[k])
                    if svals[k] * svals[k + 1] < 0:
                        root = polish(sub[k], sub[k + 1])
                        if root is not None:
                            return root, (sub[k], sub[k + 1])
            if va == 0.0:
                return zs[j], (zs[j], zs[j])
            if va * vb < 0:
                root = polish(zs[j], zs[j + 1])
                if root is not None:
                    return root, (zs[j], zs[j + 1])
    return None


def _newton_quality(fn, root: float) -> float:
    """Newton-normalized residual: estimated relative error of the root."""
    if root <= 0:
        return 0.0
    h = max(1e-8 * root, 1e-12)
    slope = (fn(root + h) - fn(root - h)) / (2.0 * h)
    return fn(root) / (slope * root) if slope != 0 else 0.0


def smallest_root(geom: DeviceGeometry, vortices: VortexConfig,
                  tp: TransportParams, form: str = "reduced") -> ModeSolution:
    """Smallest strictly positive root of the mode equation, as a ModeSolution.

    For zero total trapping power (N = 0 or P = 0) the uniform mode z = 0
    is exact and returned without a search.  With equal vortex counts the
    equation factorizes and each branch is rooted separately; otherwise
    the residual itself is scanned between consecutive poles with a step
    no larger than a quarter of the smallest pole spacing.  z = 0 is
    always a trivial zero of the residual and is excluded by starting the
    scan just above it.
    """
    der, eps, nbar, dn = _groups(geom, vortices, tp)
    if eps == 0 or vortices.n_left + vortices.n_right == 0:
        return ModeSolution(z=0.0, s=tp.s0, bracket=(0.0, 0.0),
                            residual_at_root=0.0,
                            branch_note=f"{form}: no trapping, uniform mode")

    z_cap = 0.5 * math.pi * (1.0 + 1e-9)
    poles = _pole_positions(geom, z_cap, form)
    scales = [1.0, geom.h_cap / geom.l_wire, geom.l_cap / geom.l_wire,
              (geom.h_cap + geom.l_cap) / geom.l_wire]
    if form == "full":
        scales.append(geom.l_half_gap / geom.l_wire)
    step = 0.25 * math.pi / max(scales)

    if dn == 0:
        candidates = []
        for idx in (0, 1):
            def factor(z, idx=idx):
                return _symmetric_factors(z, geom, vortices, tp, form)[idx]
            hit = _first_root(factor, geom, form, poles, step, z_cap)
            if hit is not None:
                candidates.append((hit[0], hit[1], factor, idx))
        if candidates:
            root, bracket, fn, idx = min(candidates, key=lambda c: c[0])
            return ModeSolution(
                z=root, s=root * root / der.tau_d + tp.s0,
                bracket=(float(bracket[0]), float(bracket[1])),
                residual_at_root=float(_newton_quality(fn, root)),
                branch_note=f"{form}: symmetric-pads factor {idx}")
    else:
        def resid(z):
            return _residual_terms(z, geom, vortices, tp, form)[0]
        hit = _first_root(resid, geom, form, poles, step, z_cap)
        if hit is not None:
            root, bracket = hit
            return ModeSolution(
                z=root, s=root * root / der.tau_d + tp.s0,
                bracket=(float(bracket[0]), float(bracket[1])),
                residual_at_root=float(_newton_quality(resid, root)),
                branch_note=f"{form}: general scan")
    raise NoRootFoundError(
        "no sign change below the first pole cluster; geometry or "
        "parameters are pathological",
        diagnostics={"poles": poles, "scan_step": step, "eps": eps,
                     "nbar": nbar, "dn": dn})


def small_p_rate(geom: DeviceGeometry, vortices: VortexConfig,
                 tp: TransportParams) -> float:
    """Weak-trapping closed form s = (N_L + N_R) P / A_total + s0."""
    der = derive(geom, tp.d)
    n = vortices.n_left + vortices.n_right
    return n * vortices.trapping_power / der.a_total + tp.s0


def large_p_z(geom: DeviceGeometry) -> float:
    """Strong-trapping limit z -> (pi/2) / (1 + A_c/A_W) of the root.

    Leading order for A_c << A_W; the exact saturation root solves
    2 tan(z) T_cap(z) = 1.
    """
    der = derive(geom, 1.0)
    return 0.5 * math.pi / (1.0 + der.a_c / der.a_w)


_SERIES = {
    # one vortex at a time, alternating pads
    "alternating": lambda k: ((k + 1) // 2, k // 2),
    # vortices entering two at a time, one per pad
    "pairs": lambda k: (k, k),
}


def step_sequence(geom: DeviceGeometry, tp: TransportParams,
                  trapping_power: float, series: str = "alternating",
                  max_steps: int = 4, form: str = "reduced"):
    """Predicted quantized trapping rates for the first vortex entries.

    Returns a list of (n_left, n_right, s, s * a_total) for steps
    0..max_steps of the chosen vortex-number series.  Early steps increase
    s * a_total by nearly the single-vortex trapping power (per vortex),
    reduced a little by the finite speed of diffusion.
    """
    if max_steps < 1:
        raise InvalidParameterError(f"max_steps must be >= 1, got {max_steps}")
    if series not in _SERIES:
        raise InvalidParameterError(
            f"series must be one of {sorted(_SERIES)}, got {series!r}")
    der = derive(geom, tp.d)
    rows = []
    for k in range(max_steps + 1):
        nl, nr = _SERIES[series](k)
        vc = VortexConfig(n_left=nl, n_right=nr,
                          trapping_power=trapping_power)
        sol = smallest_root(geom, vc, tp, form=form)
        rows.append((nl, nr, sol.s, sol.s * der.a_total))
    return rows


def field_sweep(geom: DeviceGeometry, tp: TransportParams,
                trapping_power: float, b_grid, b_k: float,
                vortex_density_slope: float, pads: str = "equal",
                form: str = "reduced"):
    """Decay rate versus cooling field B.

    Below the critical entry field b_k no vortices are trapped.  Above it
    the count grows linearly: with pads='equal' both pads hold
    round(slope * (B - b_k)) vortices; with pads='alternating' the total
    round(2 * slope * (B - b_k)) is split as evenly as possible with the
    left pad leading.  Returns a list of (B, n_left, n_right, s).
    """
    if not (b_k > 0):
        raise InvalidParameterError(f"b_k must be > 0, got {b_k}")
    if not (vortex_density_slope >= 0):
        raise InvalidParameterError(
            f"slope must be >= 0, got {vortex_density_slope}")
    if pads not in ("equal", "alternating"):
        raise InvalidParameterError(
            f"pads must be 'equal' or 'alternating', got {pads!r}")
    rows = []
    for b in b_grid:
        if b < b_k:
            nl = nr = 0
        elif pads == "equal":
            nl = nr = int(round(vortex_density_slope * (b - b_k)))
        else:
            total = int(round(2.0 * vortex_density_slope * (b - b_k)))
            nl, nr = (total + 1) // 2, total // 2
        vc = VortexConfig(n_left=nl, n_right=nr,
                          trapping_power=trapping_power)
        sol = smallest_root(geom, vc, tp, form=form)
        rows.append((float(b), nl, nr, sol.s))
    return rows
