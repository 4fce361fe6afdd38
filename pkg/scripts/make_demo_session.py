#!/usr/bin/env python3
"""Generate a demo pool + query under ./demo_data and print the commands to
label it via the CLI or through the annotation service + browser UI."""

import argparse
from pathlib import Path

from flame.embedding_io import save_pool_jsonl, save_query
from flame.pipeline import SyntheticBenchmarkSpec, generate_synthetic_benchmark


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="demo_data")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--pool-size", type=int, default=1000)
    parser.add_argument("--dim", type=int, default=32)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = SyntheticBenchmarkSpec(dim=args.dim, pool_size=args.pool_size,
                                  seed=args.seed)
    records, query = generate_synthetic_benchmark(spec)
    save_pool_jsonl(records, out / "pool.jsonl")
    save_query(query, out / "query.json")
    print(f"wrote {out / 'pool.jsonl'} ({len(records)} records) and "
          f"{out / 'query.json'}\n")
    print("CLI loop:")
    print(f"  flame sample --pool {out}/pool.jsonl --query {out}/query.json "
          f"--seed {args.seed} --out-dir {out}")
    print(f"  flame label --shots {out}/shots.json --out-dir {out}")
    print(f"  flame train --pool {out}/pool.jsonl --query {out}/query.json "
          f"--labels {out}/labels.csv --seed {args.seed} --out-dir {out}")
    print(f"  flame eval --model {out}/model.json --pool {out}/pool.jsonl "
          f"--query {out}/query.json --out-dir {out}")
    print("\nService + UI:")
    print("  flame serve --port 8400 --data flame_sessions")
    print("  # then open frontend/index.html and create a session pointing at")
    print(f"  # {out}/pool.jsonl and {out}/query.json")


if __name__ == "__main__":
    main()
