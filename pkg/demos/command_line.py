"""
Command line
============

The ``mtflock`` command wraps the library.  Here it is driven through its
``main`` function; from a shell use ``mtflock kinetic --config FILE --out DIR``.
"""

import tempfile
from pathlib import Path

from mtflock.cli import main
from mtflock.config import shipped_config

out = Path(tempfile.mkdtemp(prefix="mtflock-"))

##############################################################################
# A kinetic run writes diagnostics and snapshots; ``check`` runs every
# estimate on one configuration and exits 1 if any fails.

status = main(["kinetic", "--config", str(shipped_config("free_transport")), "--out", str(out / "kin")])
print("kinetic exit", status, sorted(p.name for p in (out / "kin").iterdir())[:4])
print((out / "kin" / "diagnostics.csv").read_text().splitlines()[0])

status = main(["check", "--config", str(shipped_config("free_transport")), "--out", str(out / "chk")])
print("check exit", status)

##############################################################################
# Errors give a nonzero exit code and one CSV line on stderr.

print("missing config exit", main(["sweep", "--config", str(out / "none.cfg")]))
