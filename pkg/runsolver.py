import argparse
import logging
import os
import sys

# prevent asap other modules from defining the root logger using basicConfig
import avgcost.logger

import avgcost
from avgcost.utils import Namespace as ns, config_load, timestamp
from avgcost import log
from avgcost.defaults import default_dirs, output_dir_env_var
from avgcost.runner import Command, RunConfig, RviVariant, run


def beta_arg(value):
    if value == 'lp':
        return value
    try:
        float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be `lp` or a number, got `{value}`.")
    return value


parser = argparse.ArgumentParser(formatter_class=argparse.RawTextHelpFormatter)
parser.add_argument('command', choices=[c.value for c in Command],
                    help="The computation to run:"
                         "\n• solve: exact optimal average cost (LP, cross-checked by enumeration and policy iteration)."
                         "\n• split: split chain construction and equivalence checks."
                         "\n• vi: value iteration with a known beta."
                         "\n• rvi: relative value iteration, see `variant`."
                         "\n• rolling: receding horizon policies of value iteration."
                         "\n• lqg-demo: sensor scheduling on the variance grid, with closed loop simulation.")
parser.add_argument('variant', nargs='?', choices=[v.value for v in RviVariant], default=None,
                    help="The offset used by `rvi`: nu(V), min V or V(anchor).")
parser.add_argument('-m', '--model', metavar='model', default=None,
                    help="A model json file, or the name of a model bundled in resources/models"
                         "\n(resources/lqg for lqg-demo).")
parser.add_argument('--smallset', metavar='path|auto', default=None,
                    help="The small set json file, or `auto` to pick the most absorbing singleton."
                         "\nBy default, the `{model}.smallset.json` file next to the model is used when present.")
parser.add_argument('--beta', type=beta_arg, default='lp',
                    help="The average cost used by `vi`: `lp` for the LP optimum, or a number."
                         "\n(default: '%(default)s')")
parser.add_argument('--anchor', type=int, default=None,
                    help="The anchor state of `rvi anchor`, the first state of the small set by default.")
parser.add_argument('--span-tol', dest='span_tol', type=float, default=None,
                    help="Stops the iterations when the span of successive differences is below this value."
                         "\n(default: `solvers.span_tol` in resources/config.yaml)")
parser.add_argument('--max-iters', dest='max_iters', type=int, default=None,
                    help="Maximum number of iterations."
                         "\n(default: `solvers.max_iters` in resources/config.yaml)")
parser.add_argument('--seed', type=int, default=None,
                    help="Seed of the lqg-demo simulation."
                         "\n(default: `seed` in resources/config.yaml)")
parser.add_argument('--horizon', type=int, default=None,
                    help="Number of simulated steps in lqg-demo."
                         "\n(default: `lqg.horizon` in resources/config.yaml)")
parser.add_argument('-o', '--outdir', metavar='output_dir', default=None,
                    help="Folder where all the outputs should be written."
                         f"\n(default: ${output_dir_env_var} or '{default_dirs.output_dir}')")
parser.add_argument('-u', '--userdir', metavar='user_dir', default=None,
                    help="Folder where all the customizations are stored."
                         f"\n(default: '{default_dirs.user_dir}')")
parser.add_argument('-p', '--parallel', metavar='parallel_jobs', type=int, default=None,
                    help="The number of threads used for enumeration, rolling horizon evaluation and simulations."
                         "\n(default: `job_scheduler.parallel_jobs` in resources/config.yaml)")
parser.add_argument('--config', default=None,
                    help="A custom config file, overriding the one found in the user dir.")
parser.add_argument('--logging', type=str, default="console:info,app:debug,root:info",
                    help="Set the log levels for the 3 available loggers:"
                         "\n• console"
                         "\n• app: for the log file including only logs from avgcost (.log extension)."
                         "\n• root: for the log file including logs from libraries (.full.log extension)."
                         "\nAccepted values for each logger are: notset, trace, debug, info, warning, error, fatal, critical."
                         "\nExamples:"
                         "\n  --logging=info (applies the same level to all loggers)"
                         "\n  --logging=root:debug (keeps defaults for non-specified loggers)"
                         "\n  --logging=console:warning,app:info"
                         "\n(default: '%(default)s')")
parser.add_argument('--profiling', nargs='?', const=True, default=False, help=argparse.SUPPRESS)
parser.add_argument('--session', type=str, default=None, help=argparse.SUPPRESS)
parser.add_argument('-X', '--extra', default=[], action='append', help=argparse.SUPPRESS)

args = parser.parse_args()
script_name = os.path.splitext(os.path.basename(__file__))[0]
extras = {t[0]: t[1] if len(t) > 1 else True for t in [x.split('=', 1) for x in args.extra]}

if args.command == Command.rvi.value and args.variant is None:
    parser.error("`rvi` requires a variant among nu, min, anchor.")

run_config = RunConfig(command=args.command,
                       variant=args.variant,
                       model_path=args.model,
                       smallset=args.smallset,
                       beta=args.beta,
                       anchor=args.anchor,
                       span_tol=args.span_tol,
                       max_iters=args.max_iters,
                       seed=args.seed,
                       horizon=args.horizon,
                       parallel_jobs=args.parallel,
                       session=args.session)

output_dir = args.outdir or os.environ.get(output_dir_env_var) or None
now_str = timestamp()
log_dir = avgcost.resources.output_dirs(output_dir or default_dirs.output_dir,
                                        session=run_config.session_name,
                                        subdirs='logs',
                                        create=True)['logs']
if args.profiling:
    logging.TRACE = logging.INFO
log_levels = avgcost.logger.parse_levels(args.logging)
avgcost.logger.setup(log_file=os.path.join(log_dir, f"{script_name}.{now_str}.log"),
                     root_file=os.path.join(log_dir, f"{script_name}.{now_str}.full.log"),
                     root_level=log_levels["root"], app_level=log_levels["app"], console_level=log_levels["console"])

log.info("Running `%s` on model `%s`.", ' '.join(filter(None, [args.command, args.variant])), args.model)
log.debug("Script args: %s.", args)

config_default = config_load(os.path.join(default_dirs.root_dir, "resources", "config.yaml"))
config_default_dirs = default_dirs
config_user = config_load(args.config or os.path.join(args.userdir or default_dirs.user_dir, "config.yaml"))
# config listing properties set by command line
config_args = ns.parse(
    output_dir=output_dir,
    user_dir=args.userdir,
    script=os.path.basename(__file__),
    command=' '.join(sys.argv),
) + ns.parse(extras)
config_args = ns({k: v for k, v in config_args if v is not None})
log.debug("Config args: %s.", config_args)
# merging all configuration files
avgcost.resources.from_configs(config_default, config_default_dirs, config_user, config_args)

exit_code = run(run_config)
sys.exit(exit_code)
