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

__version__ = "0.1.0"

from .utils import settings, Period, Status, Category, Linkage, Audit
from .utils import (DraftivError, IngestError, EmptySampleError, ConvergenceError, CollinearityError,
                    FormulaError, ConfigError, InfeasibleError, StageError, WeakInstrumentWarning)
from .panel import load_tables, build_panel, merge_and_clean, derive_covariates, PeriodBoundaries
from .grouping import *
from .theory import *
from .instruments import *
from .hdfe import parse_formula, build_design, build_outcome, within_transform, FormulaSpec, OutcomeSpec
from .estimators import *
from .bandwagon import *
from .simulate import *
from .report import *
from .io import *
from .config import load_config, parse_config, RunConfig
from .pipeline import run, RunResult
from . import panel
from . import hdfe
from . import linalg
from . import pipeline

if __name__ == '__main__':
    print("Please execute this as a module by running 'python -m draftiv'")
