# services/chain/io/__init__.py
from .array_codec import read_array, read_state, write_array, write_state
from .csv_codec import (
    format_value,
    read_probability_csv,
    read_spectrum_csv,
    write_entropy_rows,
    write_probability_csv,
    write_rows,
    write_spectrum_csv,
)
from .spec_codec import dump_model_config, load_model_config, parse_model_config

__all__ = [
    "read_array",
    "read_state",
    "write_array",
    "write_state",
    "format_value",
    "read_probability_csv",
    "read_spectrum_csv",
    "write_entropy_rows",
    "write_probability_csv",
    "write_rows",
    "write_spectrum_csv",
    "dump_model_config",
    "load_model_config",
    "parse_model_config",
]
