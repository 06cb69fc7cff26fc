from twostop.limits import solve_b_alpha

constants = solve_b_alpha(1.0)
assert abs(constants.b_alpha - 2.794) < 2e-3

print("Smoke test passed.")
