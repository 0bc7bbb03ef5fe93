"""Taylor germs of sin: the coherence exponent tracks the expansion order.

The local reconstruction then recovers sin itself.

Run: python demos/taylor_line.py
"""
import numpy as np

from germlab.coherence import ScanGrid, coherence_scan, fit_exponents
from germlab.germ import SmoothFunction, make_taylor
from germlab.reconstruct import build_mollifier, reconstruct_local
from germlab.testfn import QuadratureSpec, polynomial_bump, rescale, standard_bump


def main():
    g = SmoothFunction.sine()
    psi = rescale(polynomial_bump([1.0, -0.4]), -0.2, 0.5)
    pts, w = psi.quadrature(QuadratureSpec(panels_per_unit=128))
    oracle = float(np.sum(w * np.sin(pts[:, 0])))
    print(" k  gamma   alpha   R(psi) - int sin*psi   n*")
    for k in (0, 1, 2):
        F = make_taylor(g, k)
        rep = fit_exponents(coherence_scan(F, ScanGrid(), standard_bump()))
        res = reconstruct_local(F, build_mollifier(standard_bump(), k + 1), psi)
        print(f"{k:2d}  {rep.gamma:5.3f}  {rep.alpha:6.3f}  {res.value - oracle: .2e}            {res.n_star}")


if __name__ == "__main__":
    main()
