import argparse
import asyncio
import logging
import sys
from pathlib import Path

import torch
from dotenv import load_dotenv

from tagshield_core.config import env_log_level, env_num_threads, load_run_config
from tagshield_core.errors import TagShieldError

from .cli import TagShieldCli

logger = logging.getLogger("tagshield_cli")

# Códigos de salida fuera de la jerarquía de TagShieldError
EXIT_MISSING_ARTIFACT = 3
EXIT_INTERRUPTED = 130


def main() -> None:
    """
    Función principal de la CLI.
    Parsea argumentos, resuelve la configuración y ejecuta el subcomando.
    """
    sys.exit(asyncio.run(async_main()))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Ruta al JSON de configuración del experimento")
    common.add_argument("--seed", type=int, help="Semilla maestra (o variable TAGSHIELD_SEED)")
    common.add_argument("--out", help="Directorio de salida")
    common.add_argument(
        "--force", action="store_true", help="Sobrescribe un directorio de salida existente"
    )
    common.add_argument(
        "--precision", type=int, choices=[32, 64], help="Precisión de punto flotante"
    )
    common.add_argument(
        "--setting",
        choices=["baseline", "oracle", "proposed_a", "proposed_b"],
        help="Configuración experimental",
    )
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="Más detalle en los logs"
    )

    parser = argparse.ArgumentParser(
        prog="tagshield",
        description="Etiquetado musical robusto al ruido con entrenamiento adversarial de dominio",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("synth", parents=[common], help="Genera el corpus sintético")

    for name, help_text in (
        ("pretrain-fe", "Etapa 1: preentrenamiento contrastivo del FE"),
        ("pretrain-dc", "Etapa 2: preentrenamiento del DC"),
        ("train", "Etapa 3: ajuste fino del FE y el LP"),
    ):
        stage = commands.add_parser(name, parents=[common], help=help_text)
        stage.add_argument("--resume", help="Checkpoint desde el que reanudar la etapa")
        stage.add_argument(
            "--stop-after-epoch", type=int, help="Interrumpe la etapa tras esta época"
        )
        if name != "pretrain-fe":
            stage.add_argument("--fe-checkpoint", help="Checkpoint final de la etapa 1")
        if name == "train":
            stage.add_argument("--dc-checkpoint", help="Checkpoint final de la etapa 2")

    evaluation = commands.add_parser("eval", parents=[common], help="Evalúa un checkpoint")
    evaluation.add_argument("--checkpoint", help="Checkpoint a evaluar")
    evaluation.add_argument("--manifest", help="Manifiesto de pistas de prueba")
    evaluation.add_argument("--noise-manifest", help="Manifiesto de ruidos de prueba")
    evaluation.add_argument(
        "--conditions", help="Condiciones separadas por comas, p. ej. clean,-5,0,5,10"
    )

    report = commands.add_parser("report", parents=[common], help="Tabla comparativa de informes")
    report.add_argument("runs", nargs="+", help="Directorios de ejecución o archivos report.jsonl")
    return parser


def configure_logging(verbose: int) -> None:
    level = "DEBUG" if verbose >= 2 else "INFO" if verbose == 1 else env_log_level("WARNING")
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


async def async_main(argv: list[str] | None = None) -> int:
    await asyncio.to_thread(load_dotenv, dotenv_path=".env")

    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    try:
        threads = env_num_threads()
        if threads is not None:
            torch.set_num_threads(threads)

        # Solo los argumentos explícitos pisan el archivo
        overrides = {
            "seed": args.seed,
            "precision": args.precision,
            "setting": args.setting,
            "eval_conditions": getattr(args, "conditions", None),
        }
        if args.out and args.command not in ("synth", "report"):
            overrides["output_dir"] = args.out
        config_path = Path(args.config) if args.config else None
        config = await asyncio.to_thread(load_run_config, config_path, overrides)

        cli = TagShieldCli(
            config, force=args.force, progress=logging.getLogger().level <= logging.INFO
        )
        await cli.run(args.command, args)

    except TagShieldError as e:
        logger.debug("Detalle del error", exc_info=True)
        await asyncio.to_thread(print, f"Error: {e}", file=sys.stderr)
        return e.exit_code

    except FileNotFoundError as e:
        logger.debug("Detalle del error", exc_info=True)
        await asyncio.to_thread(print, f"Error: falta un archivo requerido: {e}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT

    except OSError as e:
        logger.debug("Detalle del error", exc_info=True)
        await asyncio.to_thread(print, f"Error de E/S: {e}", file=sys.stderr)
        return 1

    except KeyboardInterrupt:
        await asyncio.to_thread(print, "Interrumpido", file=sys.stderr)
        return EXIT_INTERRUPTED

    return 0
