#!/usr/bin/env python3
"""Offline trace ingestion: turn a packet log into a bucketed rate trace.

Input lines are either ``timestamp_s,flow_id`` or ``timestamp_s,src,dst``
(the flow id then becomes ``src-dst``). Packets are counted per flow per
bucket and written as rates in the versioned trace format the simulator
consumes. Raw capture parsing (pcap) is out of scope; export your capture
to this text form first, e.g. with tshark:

    tshark -r cap.pcap -T fields -E separator=, \
        -e frame.time_epoch -e ip.src -e ip.dst > packets.csv
    python scripts/make_trace.py packets.csv backbone.trace --bucket-ms 100
"""

import argparse
import sys
from collections import defaultdict


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("input", help="packet log (CSV lines, see module docstring)")
    parser.add_argument("output", help="trace file to write")
    parser.add_argument("--bucket-ms", type=float, default=100.0)
    args = parser.parse_args()

    counts: dict[tuple[int, str], int] = defaultdict(int)
    t0 = None
    with open(args.input) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) == 2:
                ts, fid = float(parts[0]), parts[1]
            elif len(parts) == 3:
                ts, fid = float(parts[0]), f"{parts[1]}-{parts[2]}"
            else:
                print(f"{args.input}:{lineno}: expected 2 or 3 fields", file=sys.stderr)
                return 2
            if t0 is None:
                t0 = ts
            bucket = int((ts - t0) * 1000.0 // args.bucket_ms)
            counts[(bucket, fid)] += 1

    bucket_s = args.bucket_ms / 1000.0
    with open(args.output, "w") as out:
        out.write("#dsamp-trace v1\n")
        for (bucket, fid), n in sorted(counts.items()):
            out.write(f"{bucket * args.bucket_ms:g},{fid},{n / bucket_s!r}\n")
    print(f"wrote {args.output}: {len(counts)} entries, "
          f"{len({f for _, f in counts})} flows")
    return 0


if __name__ == "__main__":
    sys.exit(main())
