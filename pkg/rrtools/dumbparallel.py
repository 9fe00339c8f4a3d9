'''
Serial or ipyparallel map for independent verification suites.

Every task is a picklable argument for a top-level function. Results come
back in argument order whatever order the workers finish in, so the
assembled report does not depend on scheduling. Progress goes to a status
line on stderr, never to the report.

Dependencies:
* ipyparallel (only when a cluster profile is given)
'''
import datetime
import logging
import math
import sys
import time

logger = logging.getLogger(__name__)


def _fmt_seconds(s):
    s = int(s)
    return '{:02}:{:02}:{:02}'.format(s // 3600, s % 3600 // 60, s % 60)


class StatusLine(object):
    ''' ``n/N tasks done`` line with a naive end-time forecast '''

    def __init__(self, n_tasks, stream=None, n_workers=1):
        self.n_tasks = n_tasks
        self.n_workers = n_workers
        self.stream = stream
        self.then = time.time()
        digits = int(math.log10(max(n_tasks, 1)) + 1)
        dformat = '{:' + str(digits) + 'd}'
        self.template = ('   ' + dformat + '/' + dformat
                         + ' tasks done. Forecast end {:>20s}. Ellapsed: {:>8s} Remaining: {:>8s}')
        self.width = 0

    def update(self, done):
        if self.stream is None:
            return
        ellapsed = time.time() - self.then
        remaining = self.n_tasks - done
        forecast, time_remaining = 'NA', 'NA'
        if done > self.n_workers and remaining > 0:
            rate = ellapsed / done
            tdelta = datetime.timedelta(seconds=int(rate * remaining) + 1)
            forecast = (datetime.datetime.now() + tdelta).strftime('%Y-%m-%d %H:%M:%S')
            time_remaining = _fmt_seconds(tdelta.total_seconds())
        line = self.template.format(done, self.n_tasks, forecast, _fmt_seconds(ellapsed),
                                    time_remaining)
        self.width = max(self.width, len(line))
        print(line, end='\r', file=self.stream)

    def close(self):
        if self.stream is not None and self.width:
            print(' ' * self.width, end='\r', file=self.stream)


def map_tasks(func, arguments, profile=None, status=False):
    '''
    Apply ``func`` to every argument.

    Parameters
    ----------
    func: function
        A top-level function, importable by the workers
    arguments: list
        One entry per task
    profile: str, optional
        ipython cluster profile; runs serially when omitted
    status: bool
        Print the progress line on stderr

    Returns
    -------
    list
        Results in the order of ``arguments``
    '''
    arguments = list(arguments)
    stream = sys.stderr if status else None

    if profile is None:
        line = StatusLine(len(arguments), stream)
        results = []
        for i, arg in enumerate(arguments):
            results.append(func(arg))
            line.update(i + 1)
        line.close()
        return results

    import ipyparallel as ip

    c = ip.Client(profile=profile)
    n_workers = len(c.ids)
    logger.info('%d workers on the job', n_workers)
    c.clear(block=True)

    line = StatusLine(len(arguments), stream, n_workers)
    lbv = c.load_balanced_view()
    ar = lbv.map_async(func, arguments, ordered=True)

    results = []
    # abort the scheduled jobs on every engine if anything goes wrong
    try:
        for result in ar:
            results.append(result)
            line.update(ar.progress)
    except BaseException:
        logger.exception('Aborting all remaining jobs')
        c.abort(block=True)
        raise
    finally:
        line.close()

    logger.info('Total processing time: %s', _fmt_seconds(time.time() - line.then))
    return results
