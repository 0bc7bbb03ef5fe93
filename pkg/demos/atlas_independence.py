"""For a gamma > 0 circle germ the global reconstruction ignores the atlas.

Run: python demos/atlas_independence.py
"""
import math

from germlab.germ import SmoothFunction, make_taylor
from germlab.manifold import CIRCLE, TWO_PI, Atlas, ManifoldGerm, atlas_compare, circle_test_functions
from germlab.reconstruct import build_mollifier
from germlab.testfn import standard_bump


def main():
    g = SmoothFunction.trigonometric([(1.0, 1.0, 0.0), (0.5, 2.0, 0.5 * math.pi)])
    F = ManifoldGerm(CIRCLE, make_taylor(g, 2, period=TWO_PI))
    rep = atlas_compare(F, Atlas.circle_two_arc(), Atlas.circle_three_arc(), circle_test_functions(10),
                        build_mollifier(standard_bump(), 3))
    print(" h   two-arc          three-arc        rel diff")
    for k, a, b, d in rep.rows:
        print(f"{k:2d}  {a: .12f}  {b: .12f}  {d:.1e}")
    print(rep.summary())


if __name__ == "__main__":
    main()
