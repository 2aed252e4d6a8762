"""Generate a small fleet, train the streaming engine, forecast, and score.

Run: python3 demos/quickstart.py
"""

import numpy as np

from gridcast import AdaptiveForecaster, GeneratorConfig, SmoothingParams, generate_lines
from gridcast.harness import PersistenceForecaster, RecurrentForecaster, evaluate
from gridcast.recurrent import RecurrentConfig


def main():
    cfg = GeneratorConfig(seed=7, days=21, step_s=900)
    lines = generate_lines(cfg, 5)
    tau_d = cfg.tau_d

    models = [
        PersistenceForecaster(),
        RecurrentForecaster(RecurrentConfig(tau_d=tau_d, horizon=12)),
        AdaptiveForecaster(SmoothingParams(tau_d=tau_d)),
    ]
    print(f"{len(lines)} lines, {len(lines[0])} steps of {cfg.step_s} s, horizon 12")
    for model in models:
        rep = evaluate(model, lines, horizon=12, split=14 * tau_d)
        print(f"  {rep.name:<12} rmse {rep.aggregate_rmse:.4f}  ({rep.n_predictions} targets)")

    engine = models[-1]
    print("next 3-hour forecasts per line:", np.round(engine.forecast(12), 3))
    print(f"state size per line: {engine.state.nbytes() // len(lines)} bytes")


if __name__ == "__main__":
    main()
