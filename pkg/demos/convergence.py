"""Two different states driven by one collapse record.

State A generates a record; state B, a different Gaussian, is then pushed
through exactly the same jumps. The collapses keep pulling both towards the
same centres, and their fidelity climbs towards one. The same happens for
backward-in-time states replayed from the final time.
"""
import warnings

from chronocollapse import experiments as ex

for direction in ("forward", "backward"):
    cfg = ex.default_config("converge", seed=7, direction=direction)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = ex.run_convergence(cfg)
    rows = rep.table("series").rows
    print(f"{direction}: {rep.metrics['events']} jumps, fidelity "
          f"{rep.metrics['initial_fidelity']:.3f} -> {rep.metrics['final_fidelity']:.6f}")
    for t, n, f in rows[:: max(1, len(rows) // 8)]:
        print(f"   t = {t:5.2f}  jumps = {n:3d}  fidelity = {f:.6f}")

ctl = ex.convergence_controls(ex.default_config("converge", seed=7))
print("controls:", {k: f"{v:.1e}" for k, v in ctl.items()})
