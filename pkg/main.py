import argparse
import json
import os
import sys

# Add the project root directory to Python path
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

from config.config import load_config
from core.errors import ConfigError, SearchFailedError, StageError
from core.logger import setup_logging
from modules.harness import Pipeline, hyperparam_search, pipeline_stages, stage_exit_code

EXIT_CONFIG = 2
EXIT_SEARCH = 3
EXIT_INTERRUPTED = 130

# Stages each training subcommand needs; earlier ones are reused from checkpoints
COMMAND_STAGES = {
    'train-upn': ['upn'],
    'fine-tune': ['upn', 'upn_ft'],
    'train-rat-init': ['upn', 'upn_ft', 'rat_init'],
    'train-rat': ['upn', 'upn_ft', 'rat_init', 'rat'],
    'train-suprat': ['upn', 'upn_ft', 'suprat'],
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="JSON experiment configuration (default: built-in defaults)")
    common.add_argument('--seed', type=int, help="override the experiment seed")
    common.add_argument('--out', help="output directory for checkpoints, CSVs and logs")
    common.add_argument('--paper-scale', '--full-scale', dest='full_scale', action='store_true',
                        help="use the full evaluation protocol and network size")
    common.add_argument('--log-level', help="override system.log_level")
    common.add_argument('--no-progress', action='store_true', help="disable progress bars")

    parser = argparse.ArgumentParser(prog='ratbench',
                                     description="Action-correction sim2real experiments on desk-scale tasks")
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMAND_STAGES:
        p = sub.add_parser(name, parents=[common])
        if name == 'train-rat':
            p.add_argument('--steps', type=int, help="real-world training budget (rat.real_steps)")
    sub.add_parser('eval', parents=[common], help="train what is missing, then compare all methods")
    sweep = sub.add_parser('sweep-adjacent', parents=[common], help="comparison over adjacent deviation levels")
    sweep.add_argument('--levels', type=float, nargs='+', help="relative deviation levels, e.g. 0 0.05 0.1 0.2")
    hopt = sub.add_parser('hyperopt', parents=[common], help="random search over correction-policy settings")
    hopt.add_argument('--trials', type=int, help="trial budget (search.trials)")
    sub.add_parser('pipeline', parents=[common], help="full run: train, fine-tune, correct, evaluate")
    return parser


def resolve_config(args: argparse.Namespace):
    """Config file, then --paper-scale, then the remaining flag overrides"""
    cfg = load_config(args.config)
    if args.full_scale:
        cfg = cfg.full_scale()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out:
        cfg.system.output_dir = args.out
    if args.log_level:
        cfg.system.log_level = args.log_level
    if args.no_progress:
        cfg.system.show_progress = False
    if getattr(args, 'steps', None) is not None:
        cfg.rat.real_steps = args.steps
    if getattr(args, 'levels', None):
        cfg.eval.deviation_levels = list(args.levels)
    if getattr(args, 'trials', None) is not None:
        cfg.search.trials = args.trials
    # re-validate after overrides
    return type(cfg).from_dict(cfg.to_dict())


def run_command(args: argparse.Namespace, cfg, logger) -> int:
    pipeline = Pipeline(cfg, logger=logger)
    if args.command in COMMAND_STAGES:
        pipeline.run(COMMAND_STAGES[args.command])
    elif args.command == 'hyperopt':
        context = pipeline.run(['upn', 'upn_ft'])
        result = hyperparam_search(cfg, context['upn_ft'], context['spec'], event_bus=pipeline.event_bus,
                                   output_dir=str(cfg.output_path()))
        logger.info(f"Best objective {result.best_objective:.6g} with {json.dumps(result.best_params)}")
    else:
        context = pipeline.run(pipeline_stages(cfg))
        logger.info(f"Results written to {context['results_path']}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    logger = setup_logging(name='ratbench', log_level=cfg.system.log_level,
                           log_dir=os.path.join(cfg.system.output_dir, 'logs'))
    try:
        logger.info(f"Command {args.command}: env={cfg.env_id} seed={cfg.seed} config={cfg.config_hash()}")
        return run_command(args, cfg, logger)
    except StageError as e:
        logger.error(f"Stage '{e.stage}' failed: {e.cause}")
        return stage_exit_code(e.stage)
    except SearchFailedError as e:
        logger.error(str(e))
        return EXIT_SEARCH
    except KeyboardInterrupt:
        logger.info("Shutdown requested by user")
        return EXIT_INTERRUPTED
    finally:
        logger.info("ratbench shutdown complete")


if __name__ == "__main__":
    sys.exit(main())
