import runpy
from pathlib import Path

import pytest

from fokkerlab.cli import EXIT_OK, main

DEMOS = Path(__file__).resolve().parent.parent / "demos"


@pytest.mark.slow
@pytest.mark.parametrize("script", sorted(p.name for p in DEMOS.glob("*.py")))
def test_demo_runs(script, capsys):
    runpy.run_path(str(DEMOS / script), run_name="__main__")
    assert capsys.readouterr().out.strip()


@pytest.mark.slow
@pytest.mark.parametrize("config", sorted(p.name for p in (DEMOS / "configs").glob("*.toml")))
def test_shipped_config_verifies(config, tmp_path):
    assert main(["verify", "--config", str(DEMOS / "configs" / config),
                 "--output-dir", str(tmp_path)]) == EXIT_OK
