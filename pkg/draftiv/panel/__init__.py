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

from .tables import load_tables, read_table, RawTables, RejectReport
from .tables import ATHLETE_COLUMNS, EVENT_COLUMNS, RESULT_COLUMNS
from .clean import merge_and_clean, derive_covariates, build_panel, sort_panel
from .clean import PeriodBoundaries, PANEL_COLUMNS
