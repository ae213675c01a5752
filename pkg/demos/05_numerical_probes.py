"""The numerical identities the implementation is built on.

Three checks, each against an exact mathematical statement rather than a
reference implementation:

* adjoint:   <A(Z), w> = <Z, A*(w)>  to machine precision;
* isometry:  averaged over *all* 2^(QN) modulation sign patterns,
             E ||A(Z - Z0)||^2 equals ||Z - Z0||_F^2 exactly;
* gradcheck: Wirtinger gradients match central finite differences of the
             regularized objective, hinge terms included.
"""

from moddemix import run_probe
from moddemix.operators import Dimensions

print("adjoint identity, 50 random instances:")
rep = run_probe("adjoint", {"dims": Dimensions(L=48, Q=24, M=6, K=4, N=2),
                            "trials": 50})
print(f"  max relative mismatch {rep['max_rel_mismatch']:.2e}\n")

print("exhaustive Rademacher isometry, 2^16 sign patterns:")
rep = run_probe("isometry", {"dims": Dimensions(L=16, Q=8, M=3, K=2, N=2)})
print(f"  mean energy / frobenius^2 = {rep['ratio']:.15f} "
      f"({rep['patterns']} patterns)\n")

print("same identity, Monte-Carlo at larger size (500 modulation draws):")
rep = run_probe("rip", {"dims": Dimensions(L=256, Q=256, M=4, K=4, N=2),
                        "draws": 500})
print(f"  mean ratio {rep['mean_ratio']:.3f}, "
      f"{100 * rep['fraction_within_quarter']:.0f}% of draws within [0.75, 1.25]\n")

print("gradient vs central finite differences, 25 points:")
rep = run_probe("gradcheck", {"trials": 25})
print(f"  max relative mismatch {rep['max_rel_mismatch']:.2e}")
