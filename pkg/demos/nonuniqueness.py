"""For gamma <= 0 the assembled distribution depends on the partition of unity.

The Young germ has gamma = -0.2. Its locals are taken at a fixed mollification
level on a two-arc atlas whose second chart is rescaled, and two seeded
partitions give visibly different global distributions.

Run: python demos/nonuniqueness.py
"""
from germlab.germ import builtin_young
from germlab.manifold import CIRCLE, Atlas, ManifoldGerm, atlas_compare, build_pou, circle_test_functions
from germlab.reconstruct import build_mollifier
from germlab.testfn import standard_bump


def main():
    F = ManifoldGerm(CIRCLE, builtin_young(0.6, 0.2, aligned=True))
    A = Atlas.circle_two_arc(scale=2.0)
    rep = atlas_compare(F, A, A, circle_test_functions(10), build_mollifier(standard_bump(), 1),
                        P_a=build_pou(A, 1), P_b=build_pou(A, 2), fixed_level=10)
    print(" h   POU seed 1       POU seed 2       |diff|")
    for k, a, b, _ in rep.rows:
        print(f"{k:2d}  {a: .10f}  {b: .10f}  {abs(a - b):.2e}")
    print(f"max |diff| = {max(abs(a - b) for _, a, b, _ in rep.rows):.3g}")


if __name__ == "__main__":
    main()
