from __future__ import division, absolute_import

import sys
import threading
from timeit import default_timer


__all__ = ('format_time', 'progressbar')


def format_time(t):
    """Elapsed seconds as hours, minutes and seconds.

    >>> format_time(10.4)
    '10.4s'
    >>> format_time(1000.4)
    '16min 40.4s'
    """
    minutes, seconds = divmod(t, 60)
    hours, minutes = divmod(minutes, 60)
    parts = []
    if hours:
        parts.append('{0:2.0f}hr'.format(hours))
    if hours or minutes:
        parts.append('{0:2.0f}min'.format(minutes))
    parts.append('{0:4.1f}s'.format(seconds))
    return ' '.join(parts)


class progressbar(object):
    """A progress bar over scenarios or episodes.

    Redrawn ten times a second from a background thread, and once more on
    exit.

    Parameters
    ----------
    items : sized iterable
        What to iterate over.
    width : int, optional
        Width of the bar in characters.
    enabled : bool, optional
        Draw the bar. When False the bar only passes items through.
    file : file, optional
        Where to draw. Default is ``sys.stdout``.
    label : str, optional
        What the items are, shown next to the counts.
    track_success : bool, optional
        Show the running count reported through :meth:`success`.

    Examples
    --------
    >>> with progressbar(scenarios, label='episodes',
    ...                  track_success=True) as bar:  # doctest: +SKIP
    ...     for s in bar:
    ...         if run(s).success:
    ...             bar.success()
    [########################################] | 100% | 21/21 episodes | 15 succeeded | 5.2s
    """
    interval = 0.1

    def __init__(self, items, width=40, enabled=True, file=None,
                 label='items', track_success=False):
        self.items = items
        self.total = len(items)
        self.done = 0
        self._nsuccess = 0
        self.width = width
        self.enabled = enabled
        self.file = file if file is not None else sys.stdout
        self.label = label
        self.track_success = track_success
        self._lock = threading.Lock()
        self._stopped = threading.Event()
        self._thread = None

    def __enter__(self):
        if self.enabled:
            self._started = default_timer()
            self._thread = threading.Thread(target=self._redraw_loop)
            self._thread.daemon = True
            self._thread.start()
        return self

    def __exit__(self, *exc):
        if self._thread is not None:
            self._stopped.set()
            self._thread.join()
            self._thread = None
            self._draw()
            self.file.write('\n')
            self.file.flush()

    def __iter__(self):
        for item in self.items:
            yield item
            self.done += 1

    @property
    def nsuccess(self):
        return self._nsuccess

    def success(self):
        """Count one successful item."""
        self._nsuccess += 1

    def _redraw_loop(self):
        while not self._stopped.wait(self.interval):
            self._draw()

    def render(self, elapsed):
        """The bar as one line of text."""
        frac = self.done / self.total if self.total else 1
        filled = '#' * int(self.width * frac)
        fields = ['[%s]' % filled.ljust(self.width),
                  '%d%%' % int(100 * frac),
                  '%d/%d %s' % (self.done, self.total, self.label)]
        if self.track_success:
            fields.append('%d succeeded' % self._nsuccess)
        fields.append(format_time(elapsed))
        return ' | '.join(fields)

    def _draw(self):
        line = '\r' + self.render(default_timer() - self._started)
        with self._lock:
            try:
                self.file.write(line)
                self.file.flush()
            except ValueError:
                # file closed underneath us
                pass
