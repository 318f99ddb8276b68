"""Tail constants of critical perpetuities, measured against the prediction."""
from freeperp.measure import builtin_law, symmetrize
from freeperp.perpetuity import PerpetuityProblem
from freeperp.subordination import JointLaw
from freeperp.tails import predict_tail, tauberian_estimate, verify_critical_tail

cases = [
    ("A = B ~ fbp(2,3)", JointLaw.graph(builtin_law("free_beta_prime", 2, 3)), builtin_law("free_beta_prime", 2, 1)),
    ("A = S^2, B = S, S ~ fGIG(-1)", JointLaw.graph(builtin_law("free_gig", -1.0), power=2),
     builtin_law("inverse_mp")),
]
print(f"{'pair':32s} {'exponent':>9s} {'measured':>9s} {'predicted':>9s}")
for name, rho, law in cases:
    _, e, c = predict_tail(rho)
    r = tauberian_estimate(law, e, predicted=c)
    print(f"{name:32s} {r.exponent:9.4f} {r.constant:9.5f} {c:9.5f}")

v = verify_critical_tail(PerpetuityProblem(cases[0][1]), cases[0][2])
print("\npsi route vs delta route:", v.routes)

r = tauberian_estimate(symmetrize(builtin_law("free_beta_prime", 2, 1)), regime="symmetric")
print(f"symmetrized fbp(2,1), tail of |X|: exponent {r.exponent:.4f}, constant {r.constant:.5f}")
