"""DrawSet serialization: a columnar CSV whose first line is a JSON header."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import DrawSet

_COLUMNS = ("log_prior", "log_lik_hat", "log_proposal", "n_particles", "loglik_var_hat", "antithetic_partner")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_drawset(draws: DrawSet, path) -> None:
    header = {
        "master_seed": int(draws.master_seed),
        "model_id": draws.model_id,
        "proposal_id": draws.proposal_id,
        "param_names": list(draws.param_names),
        "M": len(draws),
    }
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(draws.param_names) + list(_COLUMNS))
        for i in range(len(draws)):
            writer.writerow(
                [_fmt(v) for v in draws.theta[i]]
                + [
                    _fmt(draws.log_prior[i]),
                    _fmt(draws.log_lik_hat[i]),
                    _fmt(draws.log_proposal[i]),
                    str(int(draws.n_particles[i])),
                    _fmt(draws.loglik_var_hat[i]),
                    str(int(draws.antithetic_partner[i])),
                ]
            )


def read_drawset(path) -> DrawSet:
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path} has no JSON header line")
        header = json.loads(first[1:])
        rows = list(csv.reader(fh))
    names = rows[0]
    d = len(names) - len(_COLUMNS)
    body = rows[1:]
    table = np.array([[float(v) for v in row] for row in body], dtype=float).reshape(len(body), len(names))
    return DrawSet(
        theta=table[:, :d],
        log_prior=table[:, d],
        log_lik_hat=table[:, d + 1],
        log_proposal=table[:, d + 2],
        n_particles=table[:, d + 3].astype(np.int64),
        loglik_var_hat=table[:, d + 4],
        antithetic_partner=table[:, d + 5].astype(np.int64),
        master_seed=int(header.get("master_seed", 0)),
        model_id=header.get("model_id", ""),
        proposal_id=header.get("proposal_id", ""),
        param_names=tuple(names[:d]),
    )


def is_drawset_file(path) -> bool:
    with Path(path).open() as fh:
        return fh.readline().startswith("#")
