"""Load the bundled pm2.5 slice, clean it and cut it into forecasting windows."""

import numpy as np

from pso_forecast.pipeline import FEATURES, clean_and_select, load_bundled_slice, make_scenario

records = load_bundled_slice()
print(len(records), "hourly records, first at", records[0].timestamp, "last at", records[-1].timestamp)

# rows without a pm2.5 reading are dropped; the rest keep the seven model features
features = clean_and_select(records)
print(features.values.shape, "after cleaning,", features.dropped, "rows dropped")
print("features:", ", ".join(FEATURES))

# each scenario holds out a chronological test tail: 24, 168 or 720 hours
for scenario in ("daily", "weekly", "monthly"):
    ds = make_scenario(features, scenario, lookback=24)
    print(f"{scenario:8s} train {ds.train_x.shape}  test {ds.test_x.shape}  "
          f"test starts {ds.test_times[0]}")

ds = make_scenario(features, "daily")
# the normalizer only saw training rows
print("pm2.5 range used for scaling:", ds.normalizer.mins[0], "-", ds.normalizer.maxs[0])
print("normalized training inputs lie in", ds.train_x.min(), "to", ds.train_x.max())
print("raw test targets (ug/m3):", np.round(ds.test_y_raw[:8], 1), "...")
