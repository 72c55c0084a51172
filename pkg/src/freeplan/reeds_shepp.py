"""Reeds-Shepp curves: shortest bounded-curvature paths with reversing.

Classic closed-form word families (CSC, CCC, CCCC, CCSC, CCSCC) with the
timeflip/reflect symmetries.  Lengths are signed: positive means forward
motion, negative reverse.  Used by the coarse search both as an
obstacle-ignoring admissible heuristic and for analytic goal expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

_EPS = 1e-10
_HALF_PI = math.pi / 2.0

# segment types
L, S, R = "L", "S", "R"


def _mod2pi(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    v = math.fmod(theta, 2.0 * math.pi)
    if v <= -math.pi:
        v += 2.0 * math.pi
    elif v > math.pi:
        v -= 2.0 * math.pi
    return v


def _polar(x: float, y: float) -> Tuple[float, float]:
    return math.hypot(x, y), math.atan2(y, x)


@dataclass(frozen=True)
class RSPath:
    """Sequence of (segment type, signed length) in curvature-1 units."""

    segments: Tuple[Tuple[str, float], ...]

    @property
    def length(self) -> float:
        return sum(abs(l) for _, l in self.segments)


# ---------------------------------------------------------------------------
# base words; each returns None or a tuple of signed lengths matching types


def _lp_sp_lp(x, y, phi):
    u, t = _polar(x - math.sin(phi), y - 1.0 + math.cos(phi))
    if t >= -_EPS:
        v = _mod2pi(phi - t)
        if v >= -_EPS:
            return (t, u, v)
    return None


def _lp_sp_rp(x, y, phi):
    u1, t1 = _polar(x + math.sin(phi), y - 1.0 - math.cos(phi))
    if u1 * u1 >= 4.0:
        u = math.sqrt(u1 * u1 - 4.0)
        theta = math.atan2(2.0, u)
        t = _mod2pi(t1 + theta)
        v = _mod2pi(t - phi)
        if t >= -_EPS and v >= -_EPS:
            return (t, u, v)
    return None


def _lp_rm_l(x, y, phi):
    xi = x - math.sin(phi)
    eta = y - 1.0 + math.cos(phi)
    u1, theta = _polar(xi, eta)
    if u1 <= 4.0:
        u = -2.0 * math.asin(0.25 * u1)
        t = _mod2pi(theta + 0.5 * u + math.pi)
        v = _mod2pi(phi - t + u)
        if t >= -_EPS and u <= _EPS:
            return (t, u, v)
    return None


def _tau_omega(u, v, xi, eta, phi):
    delta = _mod2pi(u - v)
    A = math.sin(u) - math.sin(delta)
    B = math.cos(u) - math.cos(delta) - 1.0
    t1 = math.atan2(eta * A - xi * B, xi * A + eta * B)
    t2 = 2.0 * (math.cos(delta) - math.cos(v) - math.cos(u)) + 3.0
    tau = _mod2pi(t1 + math.pi) if t2 < 0 else _mod2pi(t1)
    omega = _mod2pi(tau - u + v - phi)
    return tau, omega


def _lp_rup_lum_rm(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho = 0.25 * (2.0 + math.hypot(xi, eta))
    if rho <= 1.0:
        u = math.acos(rho)
        t, v = _tau_omega(u, -u, xi, eta, phi)
        if t >= -_EPS and v <= _EPS:
            return (t, u, -u, v)
    return None


def _lm_rum_lup_rp(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho = (20.0 - xi * xi - eta * eta) / 16.0
    if 0.0 <= rho <= 1.0:
        u = -math.acos(rho)
        if u >= -_HALF_PI:
            t, v = _tau_omega(u, u, xi, eta, phi)
            if t >= -_EPS and v >= -_EPS:
                return (t, u, u, v)
    return None


def _lp_rm_sm_lm(x, y, phi):
    xi = x - math.sin(phi)
    eta = y - 1.0 + math.cos(phi)
    rho, theta = _polar(xi, eta)
    if rho >= 2.0:
        r = math.sqrt(rho * rho - 4.0)
        u = 2.0 - r
        t = _mod2pi(theta + math.atan2(r, -2.0))
        v = _mod2pi(phi - _HALF_PI - t)
        if t >= -_EPS and u <= _EPS and v <= _EPS:
            return (t, -_HALF_PI, u, v)
    return None


def _lp_rm_sm_rm(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho, theta = _polar(-eta, xi)
    if rho >= 2.0:
        t = theta
        u = 2.0 - rho
        v = _mod2pi(t + _HALF_PI - phi)
        if t >= -_EPS and u <= _EPS and v <= _EPS:
            return (t, -_HALF_PI, u, v)
    return None


_WORDS = [
    (_lp_sp_lp, (L, S, L)),
    (_lp_sp_rp, (L, S, R)),
    (_lp_rm_l, (L, R, L)),
    (_lp_rup_lum_rm, (L, R, L, R)),
    (_lm_rum_lup_rp, (L, R, L, R)),
    (_lp_rm_sm_lm, (L, R, S, L)),
    (_lp_rm_sm_rm, (L, R, S, R)),
]

_SWAP = {L: R, R: L, S: S}


def _candidates(x: float, y: float, phi: float) -> List[RSPath]:
    # the backwards transform solves for the reversed word: a path for
    # (xb, yb, phi) read back-to-front is a path for (x, y, phi)
    xb = x * math.cos(phi) + y * math.sin(phi)
    yb = x * math.sin(phi) - y * math.cos(phi)
    out = []
    for fn, types in _WORDS:
        for backwards in (False, True):
            x0, y0 = (xb, yb) if backwards else (x, y)
            for timeflip in (False, True):
                for reflect in (False, True):
                    xs = -x0 if timeflip else x0
                    ys = -y0 if reflect else y0
                    ps = -phi if (timeflip != reflect) else phi
                    lengths = fn(xs, ys, ps)
                    if lengths is None:
                        continue
                    segs = []
                    for ty, ln in zip(types, lengths):
                        if timeflip:
                            ln = -ln
                        if reflect:
                            ty = _SWAP[ty]
                        if abs(ln) > _EPS:
                            segs.append((ty, ln))
                    if backwards:
                        segs.reverse()
                    if segs:
                        out.append(RSPath(tuple(segs)))
    return out


def shortest_path(q0, q1, turning_radius: float) -> Optional[RSPath]:
    """Shortest curve from pose q0 to q1; lengths are in curvature-1 units.

    Poses are (x, y, heading).  Returns None only for the degenerate
    zero-displacement case.
    """
    dx = q1[0] - q0[0]
    dy = q1[1] - q0[1]
    dphi = q1[2] - q0[2]
    c, s = math.cos(q0[2]), math.sin(q0[2])
    x = (c * dx + s * dy) / turning_radius
    y = (-s * dx + c * dy) / turning_radius
    if abs(x) < _EPS and abs(y) < _EPS and abs(_mod2pi(dphi)) < _EPS:
        return RSPath(())
    cands = _candidates(x, y, _mod2pi(dphi))
    if not cands:
        return None
    return min(cands, key=lambda p: p.length)


def path_length(q0, q1, turning_radius: float) -> float:
    """Shortest curve length in meters (inf if no curve found)."""
    p = shortest_path(q0, q1, turning_radius)
    if p is None:
        return math.inf
    return p.length * turning_radius


def sample_path(q0, path: RSPath, turning_radius: float,
                step: float) -> List[Tuple[float, float, float, int]]:
    """Poses along the curve: (x, y, heading, direction), direction +-1.

    Includes the start pose; heading accumulates (no wrapping).  ``step`` is
    the arc-length spacing in meters.
    """
    x, y, phi = q0
    out = [(x, y, phi, 1)]
    for ty, ln in path.segments:
        direction = 1 if ln >= 0 else -1
        total = abs(ln) * turning_radius
        n = max(1, int(math.ceil(total / step)))
        ds = total / n
        for _ in range(n):
            d = direction * ds
            if ty == S:
                x += d * math.cos(phi)
                y += d * math.sin(phi)
            else:
                dphi = d / turning_radius * (1 if ty == L else -1)
                # exact arc integration
                radius = turning_radius * (1 if ty == L else -1)
                cx = x - radius * math.sin(phi)
                cy = y + radius * math.cos(phi)
                phi += dphi
                x = cx + radius * math.sin(phi)
                y = cy - radius * math.cos(phi)
            out.append((x, y, phi, direction))
    return out
