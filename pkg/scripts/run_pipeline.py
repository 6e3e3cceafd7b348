"""Run the full six-stage pipeline on the bundled dataset.

Thin wrapper over `frontierlab pipeline` so there is one obvious entry point
for reproducing every output file.  All configuration still flows through the
usual channels (INI file, FRONTIERLAB_* environment variables, flags).

Usage: python scripts/run_pipeline.py [-o OUTDIR] [--config FILE] [extra flags...]
"""

import sys

from frontierlab.cli import main

if __name__ == "__main__":
    sys.exit(main(["pipeline", *sys.argv[1:]]))
