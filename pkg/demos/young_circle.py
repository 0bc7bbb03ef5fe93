"""The built-in Young germ g(x) xi on the circle, seen through one chart.

Coherence and homogeneity fits recover the nominal exponents
gamma = 0.1, alpha = beta = -0.6.

Run: python demos/young_circle.py
"""
from germlab.coherence import ScanGrid, coherence_scan, fit_exponents, homogeneity_scan
from germlab.germ import builtin_young
from germlab.manifold import CIRCLE, Atlas, ManifoldGerm
from germlab.testfn import standard_bump


def main():
    F = ManifoldGerm(CIRCLE, builtin_young(0.7, 0.4))
    chart = Atlas.circle_three_arc().charts[0]
    G = F.chart_germ(chart)
    mid = float(G.domain.center[0])
    grid = ScanGrid((mid - 0.5,), (mid + 0.5,), domain=G.domain)
    coh = fit_exponents(coherence_scan(G, grid, standard_bump()))
    hom = homogeneity_scan(G, grid, standard_bump())
    print(coh.summary())
    print(hom.summary())
    print(f"beta < gamma: {hom.beta < coh.gamma}")


if __name__ == "__main__":
    main()
