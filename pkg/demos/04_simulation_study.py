"""
A small Monte Carlo study
=========================

Sweep the SNR for the first PC and summarize FDR and TPR per method. The
tidy table is what ``trexpca simulate`` writes and ``trexpca plot`` reads.
Use more replications for smoother curves.
"""
import os

from trexpca.simulator import Cell, Study, run_grid

study = Study(methods=("trex", "trex_thresholded", "oracle_thresholded", "oracle_spca"), seed=11)
cells = [Cell(snr_db=s, p1=5, alpha=0.1, n_components=1) for s in (-10.0, -5.0, 0.0, 5.0, 10.0)]
table = run_grid(study, cells, replications=int(os.environ.get("REPS", 10)))

view = table.pivot_table(index="snr_db", columns="method", values=["fdr", "tpr"])
print(view.round(3).to_string())
