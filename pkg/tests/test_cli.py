"""Pruebas de la CLI: subcomandos encadenados y códigos de salida."""

import asyncio
import json
from pathlib import Path

import pytest
import torch

import tagshield_core.trainer.trainer as trainer_module
from tagshield_cli.cli import TagShieldCli
from tagshield_cli.main import async_main, build_parser
from tagshield_core.evalkit import read_report

MANIFESTS = (
    "train",
    "train_oracle",
    "extra",
    "valid",
    "test",
    "noise_train",
    "noise_valid",
    "noise_test",
)


@pytest.fixture
def workspace(tmp_path: Path, monkeypatch) -> Path:
    """Directorio de trabajo con una configuración diminuta."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("TAGSHIELD_SEED", raising=False)
    corpus = tmp_path / "corpus"
    stage = {"learning_rate": 1e-3, "max_epochs": 2, "batch_size": 4}
    config = {
        "setting": "proposed_a",
        "n_tags": 8,
        "encoder": {"input_length": 243, "n_blocks": 4, "base_channels": 4, "embedding_dim": 16},
        "fe_pretrain": stage,
        "dc_pretrain": {**stage, "max_epochs": 1},
        "finetune": {**stage, "max_epochs": 1, "patience": 5},
        "manifests": {name: str(corpus / f"{name}.jsonl") for name in MANIFESTS},
        "synth": {
            "n_tracks": 40,
            "n_extra": 4,
            "n_noises": 6,
            "track_duration_s": 0.05,
            "noise_duration_s": 0.05,
            "write_audio": False,
            "output_dir": str(corpus),
        },
        "output_dir": str(tmp_path / "runs"),
    }
    (tmp_path / "tiny.json").write_text(json.dumps(config), encoding="utf-8")
    return tmp_path


def _cli(*argv: str) -> int:
    return asyncio.run(async_main(list(argv)))


class TestParser:
    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["train", "--seed", "3", "--stop-after-epoch", "2"])
        assert args.command == "train"
        assert args.seed == 3 and args.stop_after_epoch == 2
        assert args.dc_checkpoint is None
        with pytest.raises(SystemExit):
            parser.parse_args(["pretrain-fe", "--dc-checkpoint", "x"])

    def test_registry_covers_parser(self, run_config):
        cli = TagShieldCli(run_config)
        assert set(cli.command_registry) == {
            "synth",
            "pretrain-fe",
            "pretrain-dc",
            "train",
            "eval",
            "report",
        }


class TestExitCodes:
    def test_invalid_configuration(self, workspace):
        (workspace / "bad.json").write_text('{"noise_count": 3}', encoding="utf-8")
        assert _cli("pretrain-fe", "--config", "bad.json") == 2

    def test_missing_manifest(self, workspace):
        assert _cli("pretrain-fe", "--config", "tiny.json") == 3

    def test_missing_checkpoint(self, workspace, capsys):
        assert _cli("synth", "--config", "tiny.json") == 0
        assert _cli("train", "--config", "tiny.json") == 3
        assert "Error" in capsys.readouterr().err

    def test_existing_output(self, workspace):
        assert _cli("synth", "--config", "tiny.json") == 0
        assert _cli("synth", "--config", "tiny.json") == 2
        assert _cli("synth", "--config", "tiny.json", "--force") == 0

    def test_divergence(self, workspace, monkeypatch):
        monkeypatch.setattr(
            trainer_module,
            "contrastive_loss",
            lambda model, batch, temperature: torch.tensor(float("inf")),
        )
        assert _cli("synth", "--config", "tiny.json") == 0
        assert _cli("pretrain-fe", "--config", "tiny.json") == 4

    def test_interrupt(self, workspace, monkeypatch):
        async def interrupted(self, command, args):
            raise KeyboardInterrupt

        monkeypatch.setattr(TagShieldCli, "run", interrupted)
        assert _cli("synth", "--config", "tiny.json") == 130


class TestPipeline:
    def test_stages_eval_and_report(self, workspace, capsys):
        runs = workspace / "runs"
        assert _cli("synth", "--config", "tiny.json") == 0
        assert (workspace / "corpus" / "train.jsonl").is_file()

        assert _cli("pretrain-fe", "--config", "tiny.json", "--seed", "7") == 0
        snapshot = json.loads((runs / "pretrain-fe" / "config.json").read_text(encoding="utf-8"))
        assert snapshot["seed"] == 7
        assert (runs / "pretrain-fe" / "checkpoints" / "final.ckpt").is_file()
        assert len((runs / "pretrain-fe" / "metrics.jsonl").read_text().splitlines()) == 2

        for command in ("pretrain-dc", "train", "eval"):
            assert _cli(command, "--config", "tiny.json", "--seed", "7") == 0
        report = read_report(runs / "eval" / "report.jsonl")
        assert report.label == "proposed_a"
        assert [m.condition.label for m in report.conditions] == [
            "clean",
            "-5dB",
            "0dB",
            "5dB",
            "10dB",
        ]
        assert (runs / "eval" / "report.txt").is_file()

        capsys.readouterr()
        assert _cli("report", str(runs), "--out", str(workspace / "summary")) == 0
        printed = capsys.readouterr().out
        assert "[AUC]" in printed and "proposed_a" in printed
        assert (workspace / "summary" / "report.txt").is_file()
        assert _cli("report", str(runs), "--out", str(workspace / "summary")) == 2

    def test_interrupt_and_resume(self, workspace):
        stage_dir = workspace / "runs" / "pretrain-fe"
        assert _cli("synth", "--config", "tiny.json") == 0
        assert _cli("pretrain-fe", "--config", "tiny.json", "--stop-after-epoch", "1") == 0
        assert not (stage_dir / "checkpoints" / "final.ckpt").exists()

        partial = stage_dir / "checkpoints" / "epoch-001.ckpt"
        assert _cli("pretrain-fe", "--config", "tiny.json", "--resume", str(partial), "--seed", "1") == 2
        assert _cli("pretrain-fe", "--config", "tiny.json", "--resume", str(partial)) == 0
        assert (stage_dir / "checkpoints" / "final.ckpt").is_file()
        assert len((stage_dir / "metrics.jsonl").read_text().splitlines()) == 2

    def test_baseline_skips_domain_classifier(self, workspace):
        assert _cli("synth", "--config", "tiny.json") == 0
        assert _cli("pretrain-fe", "--config", "tiny.json") == 0
        assert _cli("train", "--config", "tiny.json", "--setting", "baseline") == 0
        assert _cli("pretrain-dc", "--config", "tiny.json", "--setting", "oracle") == 2
