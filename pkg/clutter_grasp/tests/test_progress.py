from __future__ import absolute_import

from io import StringIO

from clutter_grasp.progress import format_time, progressbar


def test_format_time():
    assert format_time(10.4) == '10.4s'
    assert format_time(1000.4) == '16min 40.4s'
    assert format_time(7322) == ' 2hr  2min  2.0s'


def test_progressbar():
    out = StringIO()
    with progressbar(list(range(4)), width=8, file=out, label='episodes',
                     track_success=True) as bar:
        for i in bar:
            if i % 2:
                bar.success()
    final = out.getvalue().split('\r')[-1]
    parts = [p.strip() for p in final.split('|')]
    assert parts[:4] == ['[########]', '100%', '4/4 episodes', '2 succeeded']
    assert final.endswith('\n')
    assert bar.nsuccess == 2


def test_progressbar_disabled():
    out = StringIO()
    with progressbar([1, 2], enabled=False, file=out) as bar:
        assert list(bar) == [1, 2]
    assert out.getvalue() == ''


def test_progressbar_empty():
    out = StringIO()
    with progressbar([], file=out, label='scenarios') as bar:
        assert list(bar) == []
    assert '0/0 scenarios' in out.getvalue()
    assert '100%' in out.getvalue()
