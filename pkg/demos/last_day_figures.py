"""Write the long-format CSV behind the last-day plots (observed series,
expected fluctuations, one- and three-hour-ahead forecasts).

Run: python3 demos/last_day_figures.py [out.csv]
"""

import sys

from gridcast import GeneratorConfig, compute_global_rms, generate
from gridcast.harness import figure_rows, long_csv
from gridcast.recurrent import RecurrentConfig


def main(out="last_day.csv"):
    cfg = GeneratorConfig(seed=1)
    window = generate(cfg)
    stats = compute_global_rms([window.slice(0, 7 * cfg.tau_d)])
    rows = []
    for horizon in (4, 12):
        rec = RecurrentConfig(tau_d=cfg.tau_d, horizon=horizon)
        part = figure_rows(window, rec, stats, 7 * cfg.tau_d + 1, len(window))
        rows += [(t, f"{name}@h{horizon}", v) for t, name, v in part]
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(long_csv(rows))
    print(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
