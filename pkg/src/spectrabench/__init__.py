"""spectrabench: spectral-modality corpus synthesis and detection evaluation.

The toolkit has four layers:

* :mod:`spectrabench.corpus` — YOLO-format manifests, labels, predictions.
* :mod:`spectrabench.transforms` / :mod:`spectrabench.pipeline` — the four
  photometric modality transforms (gray, thermal, night, obscura) and the
  seeded corpus-level batch runner.
* :mod:`spectrabench.evaluation` / :mod:`spectrabench.oracle` — mAP/F1 and
  confusion-matrix engine plus the brute-force equivalence oracle.
* :mod:`spectrabench.reporting` — timing aggregation, modality comparison
  tables, annotated renders.
"""

__version__ = "0.1.0"
