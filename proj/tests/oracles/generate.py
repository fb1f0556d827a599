"""Regenerates frozen.hpp. Values come from mpmath at 30 digits, independent of the C++ code."""
import mpmath as mp

mp.mp.dps = 30


def bump1(t):
    return mp.e ** (-1 / (1 - t * t)) if abs(t) < 1 else mp.mpf(0)


norm = mp.quad(lambda s: bump1(4 * s), [-0.25, 0, 0.25])


def phi_o(s):
    return bump1(4 * s) / norm


def phi(t):
    lo, hi = max(-0.25, t - 0.25), min(0.25, t + 0.25)
    if hi <= lo:
        return mp.mpf(0)
    return mp.quad(lambda s: phi_o(s) * phi_o(t - s), [lo, (lo + hi) / 2, hi])


def phi_hat(eta):
    a = mp.quad(lambda s: phi_o(s) * mp.cos(eta * s), mp.linspace(-0.25, 0.25, 9))
    return a * a


orders = [0, 1, 2, 5, 10, 30, 60]
args = [0.5, 1.0, 5.0, 20.0, 50.0, 100.0, 200.0]
phi_pts = [0.0, 0.05, 0.1, 0.2, 0.3, 0.45]
hat_pts = [0.0, 5.0, 20.0, 60.0, 150.0]

out = ["#pragma once", "", "// Generated by generate.py; do not edit.", "", "namespace oracle {", "",
       "struct BesselRow { int n; double r; double j; double y; };", "", "inline constexpr BesselRow kBessel[] = {"]
for n in orders:
    for r in args:
        out.append(f"    {{{n}, {r!r}, {mp.nstr(mp.besselj(n, r), 20)}, {mp.nstr(mp.bessely(n, r), 20)}}},")
out += ["};", "", "struct Sample { double t; double value; };", "", "inline constexpr Sample kPhi[] = {"]
for t in phi_pts:
    out.append(f"    {{{t!r}, {mp.nstr(phi(mp.mpf(t)), 20)}}},")
out += ["};", "", "inline constexpr Sample kPhiHat[] = {"]
for e in hat_pts:
    out.append(f"    {{{e!r}, {mp.nstr(phi_hat(mp.mpf(e)), 20)}}},")
out += ["};", "", "}  // namespace oracle", ""]
open(__file__.replace("generate.py", "frozen.hpp"), "w").write("\n".join(out))
