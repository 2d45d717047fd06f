"""
Zero forcing with quantized feedback
====================================

With about (alpha/2) log2 P feedback bits the residual interference
grows like P^(1 - alpha), and user 2 keeps alpha degrees of freedom.
Blind alignment over two slots gets 1.5 without any knowledge of user 2.
"""

from aisets.schemes import bia_curve, zf_curve

powers = [10.0 ** k for k in range(6, 19)]
for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
    c = zf_curve(alpha, powers, seed=0)
    print(f"alpha={alpha:4}: d1={c.d1.slope:.3f} d2={c.d2.slope:.3f} "
          f"sum={c.d_sum.slope:.3f} residual exponent={c.residual_exponent:.3f}")

b = bia_curve(powers[::2], seed=0)
print(f"blind alignment: d1={b.d1.slope:.3f} d2={b.d2.slope:.3f} sum={b.d_sum.slope:.3f}")
