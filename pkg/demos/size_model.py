"""Size-model walkthrough: calibrate the family constant c from published
decoder-only configurations, then check c * L * H^2 against exact counts
of desk-scale models.

Run:  python3 demos/size_model.py
"""

from tabsynth.model import (
    ModelConfig,
    STANDARD_LLMS,
    SWEEP_REFERENCE,
    calibrate_c,
    count_params,
    estimate_size,
    init_model,
)

print("=" * 72)
print("1. Calibrating c from standard configurations")
print("=" * 72)
print(f"{'family':<14}{'layers':>7}{'hidden':>8}{'params':>16}{'c raw':>9}{'c':>4}")
constants = {}
for name, layers, hidden, heads, params in STANDARD_LLMS:
    cal = calibrate_c(params, layers, hidden)
    constants[name] = cal.rounded
    print(f"{name:<14}{layers:>7}{hidden:>8}{params:>16,}{cal.raw:>9.2f}{cal.rounded:>4}")

print()
print("=" * 72)
print("2. Reference experiment grid, estimated with the calibrated constants")
print("=" * 72)
print(f"{'family':<14}{'L':>3}{'H':>6}{'c':>4}{'c*L*H^2':>16}{'reported':>14}")
for name, layers, hidden, c, reported in SWEEP_REFERENCE:
    est = estimate_size(c, layers, hidden).estimated_params
    print(f"{name:<14}{layers:>3}{hidden:>6}{c:>4}{est:>16,}{reported:>14,}")
print()
print("(reported sizes are reference data; a few rows are not consistent with")
print(" the formula, which is why they are never asserted against it)")

print()
print("=" * 72)
print("3. Desk-scale models: exact count vs. self-calibrated estimate")
print("=" * 72)
print(f"{'config':<16}{'exact':>10}{'c':>4}{'estimate':>12}{'rel err':>9}")
for layers in (1, 2, 4, 8):
    for hidden in (16, 32, 64):
        config = ModelConfig(layers, hidden, heads=4 if hidden > 16 else 2,
                             vocab_size=48, context_len=32)
        model = init_model(config, seed=0)
        exact = int(sum(v.size for v in model.params.values()))
        assert exact == count_params(config)
        c = calibrate_c(exact, layers, hidden).rounded
        est = estimate_size(c, layers, hidden).estimated_params
        err = abs(est - exact) / exact
        print(f"L={layers:<2} H={hidden:<8}{exact:>10,}{c:>4}{est:>12,}{err:>9.1%}")

print()
print("Doubling depth doubles the layer-dependent mass:")
for hidden in (32, 64):
    c1 = count_params(ModelConfig(2, hidden, 4, 48, 32))
    c2 = count_params(ModelConfig(4, hidden, 4, 48, 32))
    shell = count_params(ModelConfig(0, hidden, 4, 48, 32))
    print(f"  H={hidden}: count(4L) - count(2L) = {c2 - c1:,} = count(2L) - shell = {c1 - shell:,}")
