"""Smoke test for the kinklab extension module.

Build and install it first:

    pip install --no-build-isolation ./crates/py
"""
import math

import kinklab


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


sg = kinklab.Model("sine_gordon")
close(sg.kappa(), 4 / math.pi, 1e-8)
close(sg.constant_a(), 2.0, 1e-8)
close(sg.constants()["energy"], 8.0, 1e-6)

# normalized sine-Gordon kink: (4 atan(e^x) - pi) / pi
x = [-3.0, 0.0, 2.5]
for xi, h in zip(x, sg.kink(x)):
    close(h, (4 * math.atan(math.exp(xi)) - math.pi) / math.pi, 1e-8)

phi4 = kinklab.Model("phi4")
close(phi4.curvature, 2.0, 1e-12)
f = phi4.force([14.0])[0]
close(f * math.exp(14.0) / phi4.constant_a() ** 2, 1.0, 2e-3)
ev = phi4.spectrum(dx=0.04, domain=(-30.0, 30.0))["eigenvalues"]
close(ev[1], 1.5, 1e-3)

quartic = kinklab.Model("quartic", [0.25, 0.0, -0.5, 0.0, 0.25])
close(quartic.phi_plus, 1.0, 1e-10)

run = sg.evolve({"kind": "sg_exact_pair", "t0": 1.0}, -30.0, 30.0, 0.02, 3.0, stride=20)
drift = max(abs(e - run["E"][0]) for e in run["E"]) / run["E"][0]
assert drift < 1e-5, drift
t_end = run["t"][-1]
err = max(abs(p - kinklab.sg_exact_pair(t_end, xi)[0]) for xi, p in zip(run["x"], run["phi"]))
assert err < 1e-3, err

sol = kinklab.reduced_ode(2 * math.log(2.0), 1.0, 50.0)
close(sol["dz"][0], 2.0, 1e-8)
fit = kinklab.fit_log_law(sol["t"], [z / 2 for z in sol["z"]], (5.0, 50.0))
close(fit["a_hat"], 2.0, 1e-6)

try:
    kinklab.Model("phi6")
except ValueError:
    pass
else:
    raise AssertionError("unknown model accepted")

print("kinklab", kinklab.__version__, "smoke test passed")
