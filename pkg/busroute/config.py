"""
Configuration settings for busroute.
"""

# Wrangling
DEFAULT_LINK_THRESHOLD_MINUTES = 30.0
HOURS_PER_DAY = 24
SERVICE_DAY_ROLLOVER_HOURS = 4

# Routing parameters
DEFAULT_TP = 25.0
DEFAULT_PA_MIN = 0.8
DEFAULT_SIMULATIONS = 100
NO_DATA_PROBABILITY = 1.0

# Allocation
DEFAULT_SEARCH_CAP_MINUTES = 120
WAIT_MODELS = ('median', 'worst_case')

# Evaluation
BUS_CAPACITY = 36
DEFAULT_SWEEP_TP = [0.0, 25.0, 50.0, 75.0, 100.0]
DEFAULT_SWEEP_PA_MIN = [0.0, 0.5, 0.8, 0.9, 1.0]

# Enumerations of the input files
DIRECTIONS = ('incoming', 'outgoing')
EVENT_TYPES = ('arriving', 'departing')
DAY_KINDS = ('weekday', 'saturday', 'sunday')

# Workspace
WORKSPACE_ENV_VAR = "BUSROUTE_WORKSPACE"
DEFAULT_WORKSPACE = "workspace"
INPUT_FILES = {
    'events': 'events.csv',
    'stations': 'stations.csv',
    'schedule': 'schedule.csv',
    'shortcuts': 'shortcuts.csv',
    'boardings': 'boardings.csv',
}
OPTIONAL_INPUTS = ('shortcuts', 'boardings')
MANIFEST_FILE = "manifest.json"
LOG_FILE = "log.jsonl"
METRICS_FILE = "metrics.json"

# File format support
SUPPORTED_EXTENSIONS = ['.csv', '.csv.gz', '.xlsx', '.xls']

# Chart settings
CHART_HEIGHT = 350
SHOW_LEGEND = True
