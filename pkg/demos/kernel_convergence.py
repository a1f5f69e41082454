"""Slow convergence of the Bessel kernel integral and the effect of tail averaging.

The raw integral of J_d(2 tau) approaches its limit like t^(-1/2); averaging
over the last stretch of the window removes the oscillating tail.
"""

from gawq.kernels import KernelSpec, closed_form, kernel_integral

for d in (0, 6, 8):
    spec = KernelSpec(d)
    target = closed_form(spec)
    print(f"d = {d}: limit {target:.4f}")
    for t in (1e2, 1e3, 1e4):
        raw = abs(kernel_integral(spec, t) - target)
        avg = abs(kernel_integral(spec, t, tail_average=True) - target)
        print(f"    t = {t:>7.0f}  raw error {raw:.1e}  tail-averaged {avg:.1e}")
