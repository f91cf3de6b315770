import pathlib

from avgcost.utils import Namespace as ns

default_dirs = ns(
    output_dir=str(pathlib.Path(__file__).parent.parent / "results"),
    user_dir="~/.config/avgcost",
    root_dir=str(pathlib.Path(__file__).parent.parent)
)

output_dir_env_var = "AVGCOST_OUTPUT_DIR"
