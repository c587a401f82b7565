#!/usr/bin/env python3
"""Produce reference parser dumps for the acceptance suite.

Reads MIT-BIH records with the reference `wfdb` Python package and writes one
JSON file per record (header fields, the first 1000 digital samples per
signal, per-signal checksums, and the complete (sample, code) annotation
list). The acceptance binary compares the C++ parsers against these dumps
(criterion 1).

Usage:
    pip install wfdb
    ecg-beatnet fetch --data-dir data          # or any WFDB copy of the records
    python3 tools/make_reference_dumps.py --data-dir data --out tests/reference \
        --records 100 101 119 207
"""

import argparse
import json
import pathlib
import sys

try:
    import wfdb
except ImportError:
    sys.exit("the reference dump generator needs the `wfdb` package: pip install wfdb")

FIRST_SAMPLES = 1000


def dump_record(data_dir: pathlib.Path, name: str) -> dict:
    base = str(data_dir / name)
    record = wfdb.rdrecord(base, physical=False)
    annotations = wfdb.rdann(base, "atr", return_label_elements=["label_store"])

    signals = []
    for s in range(record.n_sig):
        fmt = record.fmt[s]
        signals.append(
            {
                "file_name": record.file_name[s],
                "format": int(fmt),
                "adc_gain": float(record.adc_gain[s]),
                "baseline": int(record.baseline[s]),
                "adc_zero": int(record.adc_zero[s]),
                "initial_value": int(record.init_value[s]),
                "checksum": int(record.checksum[s]),
                "description": record.sig_name[s],
            }
        )

    d_signal = record.d_signal  # [n_samples, n_sig] digital values
    first_samples = [
        [int(v) for v in d_signal[:FIRST_SAMPLES, s]] for s in range(record.n_sig)
    ]

    return {
        "record": name,
        "header": {
            "n_signals": int(record.n_sig),
            "sampling_frequency": float(record.fs),
            "n_samples": int(record.sig_len),
            "signals": signals,
        },
        "first_samples": first_samples,
        "checksums": [int(record.checksum[s]) for s in range(record.n_sig)],
        "annotations": [
            [int(sample), int(code)]
            for sample, code in zip(annotations.sample, annotations.label_store)
        ],
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", type=pathlib.Path, default=pathlib.Path("data"))
    parser.add_argument(
        "--out", type=pathlib.Path, default=pathlib.Path("tests/reference")
    )
    parser.add_argument(
        "--records", nargs="+", default=["100", "101", "119", "207"]
    )
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.records:
        dump = dump_record(args.data_dir, name)
        path = args.out / f"{name}.json"
        with open(path, "w") as handle:
            json.dump(dump, handle)
            handle.write("\n")
        print(
            f"{path}: {dump['header']['n_signals']} signals, "
            f"{len(dump['annotations'])} annotations"
        )


if __name__ == "__main__":
    main()
