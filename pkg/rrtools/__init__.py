from .dumbparallel import map_tasks
from .tools import get_git_hash, DirtyGitRepositoryError, \
        InvalidGitRepositoryError, run_tag, write_parameters
