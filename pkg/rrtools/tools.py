import datetime
import json
import os
import warnings

from git import InvalidGitRepositoryError, Repo


class DirtyGitRepositoryError(Exception):
    def __init__(self, value):
        self.parameter = value

    def __str__(self):
        return repr(self.parameter)


def get_git_hash(directory, length=10):
    '''
    Hash of the HEAD commit of the repository holding ``directory``.

    * If there is no repo, an InvalidGitRepositoryError is raised.
    * If the repo is dirty, a DirtyGitRepositoryError is raised.

    Parameters
    ----------
    directory: str
        The path to the directory to check.
    length: int
        The number of characters of the hash to return (default 10).
    '''
    repo = Repo(directory, search_parent_directories=True)
    if repo.is_dirty():
        raise DirtyGitRepositoryError('The git repo has uncommited modifications.')
    return repo.head.commit.hexsha[:length]


def run_tag(directory, test=False):
    '''
    Commit tag for a verification run: the HEAD hash, ``test`` for a dirty
    tree in test mode, or an empty string outside a repository.
    '''
    try:
        return get_git_hash(directory, length=10)
    except DirtyGitRepositoryError:
        if not test:
            raise
        warnings.warn('The git repo has uncommited modifications. Going ahead for test.')
        return 'test'
    except InvalidGitRepositoryError:
        return ''


def write_parameters(filename, parameters, directory, test=False):
    '''
    Save the run parameters with the commit tag and date next to a report.
    The report itself never carries these fields.
    '''
    record = dict(parameters)
    record['_git_sha'] = run_tag(directory, test=test)
    record['_date'] = datetime.datetime.now().strftime('%Y%m%d-%H%M%S')
    record['_base_dir'] = os.path.abspath(directory)
    with open(filename, 'w', encoding='utf-8') as f:
        json.dump(record, f, indent=2, ensure_ascii=False)
    return record
