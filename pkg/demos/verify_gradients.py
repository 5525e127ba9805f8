"""Check every backward kernel against central finite differences.

Also demonstrates that the checker actually catches a broken backward
pass, by flipping the sign of one layer's analytic gradient.

Run: python demos/verify_gradients.py
"""

from slimnet.gradcheck import STEP, TOLERANCE, run_suite

print(f"central differences, step {STEP:g}, tolerance {TOLERANCE:g} relative error\n")

print("honest kernels:")
for result in run_suite(trials=20, seed=0):
    print(" ", result.line())

print("\nwith a sign-flip injected into the conv backward pass:")
for result in run_suite(trials=20, seed=0, fault_layer="conv"):
    print(" ", result.line())

print("\n(a FAIL line above is the expected outcome for the injected fault)")
