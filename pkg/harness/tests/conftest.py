import subprocess
import sys
from pathlib import Path

import pytest

SHARED_FIXTURE = (
    Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "reconstruction_loss_fixture.json"
)


def run_pipeline_cli(manifest_path, out_dir, *extra_flags) -> None:
    """Drive the curation pipeline through its CLI, as a real consumer would."""
    cmd = [
        sys.executable,
        "-m",
        "sonoprep.cli",
        "pipeline",
        str(manifest_path),
        "--out-dir",
        str(out_dir),
        *extra_flags,
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"pipeline CLI failed ({proc.returncode}):\n{proc.stderr}")


@pytest.fixture(scope="session")
def fan_plan_dir(tmp_path_factory):
    """64 synthetic fans run through the curation CLI with screening disabled."""
    from tinymae.synth import write_corpus

    root = tmp_path_factory.mktemp("fans")
    manifest = write_corpus(root, count=64, size=128, seed=7)
    run_pipeline_cli(
        manifest, root, "--threshold-vis", "1.0", "--threshold-sem", "1.0", "--seed", "5"
    )
    return root
