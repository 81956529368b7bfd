import contextlib
import io

import numpy as np
import pytest
import scipy.sparse as sp

from nadecf import InteractionTable, RelativeRatingTable, ingest
from nadecf.cli import main as cli_main


def table_from_dense(dense):
    """Build an InteractionTable from a dense count array."""
    dense = np.asarray(dense, dtype=np.int64)
    users = [f"u{i}" for i in range(dense.shape[0])]
    items = [f"i{j}" for j in range(dense.shape[1])]
    return InteractionTable(users, items, sp.csr_matrix(dense))


def ratings_from_dense(dense):
    """Build a RelativeRatingTable from a dense array of values in (0, 1]."""
    dense = np.asarray(dense, dtype=np.float64)
    users = [f"u{i}" for i in range(dense.shape[0])]
    items = [f"i{j}" for j in range(dense.shape[1])]
    return RelativeRatingTable(users, items, sp.csr_matrix(dense))


def table_from_lines(text, fmt="pre-aggregated"):
    return ingest(text.splitlines(), fmt)


def run_cli(*argv):
    """Invoke the command line in process, capturing output and exit code."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = cli_main([str(a) for a in argv])
        except SystemExit as exc:
            code = exc.code if isinstance(exc.code, int) else 1
    return code, out.getvalue(), err.getvalue()


def cell_map(table):
    """Map of (user id, item id) -> stored value, index-layout agnostic."""
    matrix = table.counts if hasattr(table, "counts") else table.values
    coo = matrix.tocoo()
    return {
        (table.users[u], table.items[i]): v
        for u, i, v in zip(coo.row, coo.col, coo.data)
    }


@pytest.fixture
def rng():
    return np.random.default_rng(42)
