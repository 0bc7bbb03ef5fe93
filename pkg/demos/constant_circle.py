"""A constant germ on the circle is exactly coherent and reconstructs to itself.

Run: python demos/constant_circle.py
"""
import numpy as np

from germlab.coherence import ScanGrid, coherence_scan, fit_exponents
from germlab.distribution import Density
from germlab.germ import make_constant
from germlab.manifold import CIRCLE, Atlas, ManifoldGerm, build_pou, circle_test_functions, global_reconstruct
from germlab.reconstruct import build_mollifier
from germlab.testfn import QuadratureSpec, standard_bump


def main():
    F = ManifoldGerm(CIRCLE, make_constant(Density(np.cos)))
    A = Atlas.circle_two_arc()
    for k, chart in enumerate(A.charts):
        G = F.chart_germ(chart)
        mid = float(G.domain.center[0])
        rep = fit_exponents(coherence_scan(G, ScanGrid((mid - 0.5,), (mid + 0.5,), n_pairs=32, domain=G.domain),
                                           standard_bump()))
        print(f"chart {k}: coherence flag {rep.flag}")

    R = global_reconstruct(F, A, build_pou(A), build_mollifier(standard_bump(), 1))
    fine = QuadratureSpec(panels_per_unit=128)
    print(" h   RF(h)          int cos*h        |diff|")
    for i, h in enumerate(circle_test_functions(5, seed=4)):
        pts, w = h.quadrature(fine)
        oracle = float(np.sum(w * np.cos(pts[:, 0])))
        value = R.pair(h)
        print(f"{i:2d}  {value: .10f}  {oracle: .10f}  {abs(value - oracle):.1e}")


if __name__ == "__main__":
    main()
