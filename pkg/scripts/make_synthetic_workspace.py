#!/usr/bin/env python3
"""Write the synthetic corpus and a ready-to-run CLI config to a directory.

Produces data.tsv plus config.json so the full CLI pipeline can be driven on
real files:

    python scripts/make_synthetic_workspace.py work/
    slicemoa slices --config work/config.json
    slicemoa train  --config work/config.json --model sbl-moa --combine-op mul
"""

import argparse
import json
import sys
from pathlib import Path

from slicemoa.data import write_dataset
from slicemoa.synthetic import SyntheticSpec, default_train_config, generate_dataset


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("directory", type=Path)
    args = parser.parse_args(argv)

    args.directory.mkdir(parents=True, exist_ok=True)
    spec = SyntheticSpec()
    dataset, _ = generate_dataset(spec)
    write_dataset(dataset, args.directory / "data.tsv")

    train_cfg = default_train_config()
    config = {
        "dataset": {"path": "data.tsv", "format": "tsv", "id_col": "id"},
        "backbone": {"hashing": {"d": spec.d}},
        "slices": [{"name": "question", "builtin": "question"}],
        "model": {"kind": "sbl_moa", "combine_op": "mul", "dropout": 0.0},
        "train": train_cfg.to_record(),
        "split": {"fractions": list(spec.fractions), "seed": spec.data_seed},
        "runs": 1,
        "output_dir": "out",
    }
    (args.directory / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {args.directory / 'data.tsv'} ({len(dataset)} rows) and {args.directory / 'config.json'}")
    print(f"next: cd {args.directory} && slicemoa train --config config.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
