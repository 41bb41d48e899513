"""
QAOA on random graphs
=====================

Gradient variance of MaxCut QAOA averaged over Erdos-Renyi graphs, via the
command-line entry point.
"""

import csv
import io
from contextlib import redirect_stdout

from plateaulab.cli import main

buf = io.StringIO()
with redirect_stdout(buf):
    main(["graph", "--n", "4,6", "--samples", "200", "--seed", "3", "--param", "seed=[0,1,2]"])
for row in csv.DictReader(io.StringIO(buf.getvalue())):
    print(row["n"], row["graph_seed"], row["edges"], row["variance"], row["dim_g"])
