###########################################################
#                  Environment Variables                  #
# This is the single source of truth for env var names
###########################################################
# LoggerSettings
LOG_LEVEL_ENV = "MREM_LOG_LEVEL"
LOG_FILE_PATH = "MREM_LOG_FILE_PATH"
# ResultsDatabaseSettings
SQLITE_DATABASE_PATH_ENV = "MREM_DATABASE"
# RunConfig
SEED_ENV = "MREM_SEED"
LAYERS_ENV = "MREM_LAYERS"
OUTPUT_DIR_ENV = "MREM_OUT"
SPIN_PENALTY_ENV = "MREM_SPIN_PENALTY"
WORKERS_ENV = "MREM_WORKERS"
###########################################################
