"""Grid search over the daily smoothing rate on a three-week 5-minute fixture.

The optimum is flat: the stored default r_d = 0.15 is within 0.2 % of the
best rate on this grid (0.1), while both ends of the grid are clearly worse.

Run: python3 demos/tuning_sweep.py   (about 10 s)
"""

from gridcast import GeneratorConfig, generate_lines
from gridcast.adaptive import SmoothingParams
from gridcast.harness import rank_score, reports_to_csv, sweep


def main():
    cfg = GeneratorConfig(seed=2024, days=21, step_s=300)
    lines = generate_lines(cfg, 10)
    grid = {"r_d": [0.05, 0.1, 0.15, 0.25, 0.4], "r_w": [0.15]}
    reports = sweep(grid, lines, horizon=12, split=0.5,
                    base=SmoothingParams(tau_d=cfg.tau_d))
    print(reports_to_csv(reports, with_timing=True, rankings=rank_score(reports)), end="")
    best = min(reports, key=lambda r: r.aggregate_rmse)
    default = next(r for r in reports if r.params["r_d"] == SmoothingParams().r_d)
    gap = default.aggregate_rmse / best.aggregate_rmse - 1
    print(f"best: {best.params}, default is {100 * gap:.2f} % behind")


if __name__ == "__main__":
    main()
