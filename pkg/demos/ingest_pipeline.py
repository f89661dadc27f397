"""The price ingestion pipeline end to end, without touching the network.

Fabricates a day of 5-minute feed records in the upstream wire format,
serves them through an injected transport, aggregates to hourly means
(including one deliberately missing hour), and round-trips the result
through the CSV cache under demos/output/.

    python3 demos/ingest_pipeline.py
"""

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

from rtp_arb import aggregate_hourly, fetch_five_minute_feed, read_price_csv, write_price_csv

start = datetime(2019, 7, 1, tzinfo=timezone.utc)

# The real feed answers with a JSON array of {millisUTC, price} records,
# both as strings, one per 5 minutes. Build a day of them with a morning
# valley and an evening peak, and drop hour 13 entirely to show how gaps
# are handled.
records = []
for hour in range(24):
    if hour == 13:
        continue
    level = 2.0 + (3.0 if 16 <= hour <= 20 else 0.0) + 0.25 * (hour % 4)
    for i in range(12):
        ts = start + timedelta(hours=hour, minutes=5 * i)
        records.append({"millisUTC": str(int(ts.timestamp() * 1000)), "price": str(level)})
wire_body = json.dumps(records)
print(f"fabricated {len(records)} feed records ({records[0]})")


def canned_http_get(url: str) -> str:
    # Stand-in for the real transport; the module never notices.
    print(f"GET {url}")
    return wire_body


samples = fetch_five_minute_feed(
    start, start + timedelta(days=1), http_get=canned_http_get
)
print(f"parsed {len(samples)} samples")

series, report = aggregate_hourly(samples)
print(f"aggregated to {report.hours_emitted} hourly prices")
print(f"interpolated hours: {[h.isoformat() for h in report.hours_interpolated]}")
print(f"fewest samples in a sampled hour: {report.samples_per_hour_min}")

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(parents=True, exist_ok=True)
csv_path = out_dir / "fabricated_day.csv"
write_price_csv(series, csv_path)
print(f"wrote {csv_path}")

# The cache format is strict enough that reading it back reproduces the
# series exactly, bit for bit.
again = read_price_csv(csv_path)
print(f"round trip identical: {again == series}")
print()
print("hour  price")
for ts, price in zip(series.hours, series.prices):
    flag = "  (interpolated)" if ts in report.hours_interpolated else ""
    print(f"{ts.strftime('%H:%M')}  {price:5.2f}{flag}")
