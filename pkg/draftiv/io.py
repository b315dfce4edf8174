# draftiv - panel instrumental-variables estimation of swim drafting effects
# Copyright (C) 2025 - The draftiv developers

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#    http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Reading and writing of the flat files draftiv exchanges between stages.

Every writer is byte-deterministic: columns keep their order, floats go through
a fixed ``%g`` format and JSON keys are sorted."""

import os
import json
import math
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from .utils import settings, IngestError

__all__ = ['read_panel', 'write_panel', 'write_frame', 'write_record', 'read_record',
           'format_machine', 'hash_stamp']

ID_COLUMNS = ('athlete_id', 'event_id')


def hash_stamp(config_hash: Optional[str]) -> str:
    """The comment line that prefixes every CSV artifact of a run."""
    return "# config_hash={}\n".format(config_hash) if config_hash else ""


def _ensure_dir(path: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


def write_frame(df: pd.DataFrame, path: str, float_format: Optional[str]=None,
                config_hash: Optional[str]=None, delimiter: Optional[str]=None) -> str:
    """Writes a DataFrame as delimited text and returns the path."""
    _ensure_dir(path)
    text = df.to_csv(index=False, sep=delimiter or settings.delimiter,
                     float_format=float_format or settings.machine_format,
                     lineterminator='\n')
    with open(path, 'w', newline='') as f:
        f.write(hash_stamp(config_hash))
        f.write(text)
    return path


def write_panel(panel: pd.DataFrame, path: str, config_hash: Optional[str]=None,
                delimiter: Optional[str]=None) -> str:
    """Writes the canonical panel. Uses more digits than result files since
    later stages read it back as data."""
    out = panel.copy()
    if 'date' in out.columns:
        out['date'] = pd.to_datetime(out['date']).dt.strftime('%Y-%m-%d')
    return write_frame(out, path, float_format=settings.panel_format,
                       config_hash=config_hash, delimiter=delimiter)


def read_panel(path: str, delimiter: Optional[str]=None) -> pd.DataFrame:
    """Reads a panel written by :func:`write_panel`."""
    if not os.path.exists(path):
        raise IngestError("File {} does not exist".format(path))
    df = pd.read_csv(path, sep=delimiter or settings.delimiter, comment='#',
                     dtype={c: str for c in ID_COLUMNS})
    if 'date' in df.columns:
        df['date'] = pd.to_datetime(df['date'], format='%Y-%m-%d')
    return df


def format_machine(value: Any, fmt: Optional[str]=None) -> Any:
    """Rounds every float inside ``value`` to the machine format, recursively.
    Non-finite floats become strings so the JSON stays standard."""
    fmt = fmt or settings.machine_format
    if isinstance(value, dict):
        return {str(k): format_machine(v, fmt) for k,v in value.items()}
    if isinstance(value, (list, tuple)):
        return [format_machine(v, fmt) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v): return "nan"
        if math.isinf(v): return "inf" if v > 0 else "-inf"
        return float(fmt % v)
    if isinstance(value, np.ndarray):
        return format_machine(value.tolist(), fmt)
    return value


def write_record(record: Dict[str,Any], path: str) -> str:
    """Writes a machine-readable result record as JSON."""
    _ensure_dir(path)
    with open(path, 'w', newline='') as f:
        f.write(json.dumps(format_machine(record), sort_keys=True, indent=2))
        f.write('\n')
    return path


def read_record(path: str) -> Dict[str,Any]:
    with open(path) as f:
        return json.load(f)
