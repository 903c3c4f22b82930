from __future__ import absolute_import

import gzip
import os
import tarfile
import zipfile
from io import BytesIO

from .core import ClutterGraspException


__all__ = ('FORMATS', 'infer_format', 'archive', 'write_bundle', 'read_bundle')


FORMATS = ('zip', 'tar.gz', 'tgz', 'tar.bz2', 'tbz2', 'tar')

_tar_compression = {'tar.gz': 'gz',
                    'tgz': 'gz',
                    'tar.bz2': 'bz2',
                    'tbz2': 'bz2',
                    'tar': None}

# Fixed metadata so that bundles are byte-identical across runs
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)
_FILE_MODE = 0o644


def infer_format(path):
    """The archive format implied by a file extension, or None."""
    for fmt in sorted(FORMATS, key=len, reverse=True):
        if path.endswith('.' + fmt):
            return fmt
    return None


def archive(fileobj, format, compress_level=4):
    if format == 'zip':
        return ZipArchive(fileobj, compress_level)
    elif format in _tar_compression:
        return TarArchive(fileobj, _tar_compression[format], compress_level)
    raise ClutterGraspException("Unknown archive format %r, expected one of %s"
                                % (format, ', '.join(FORMATS)))


class TarArchive(object):
    def __init__(self, fileobj, compression, compress_level):
        self.fileobj = fileobj
        self.compression = compression
        self.compress_level = compress_level

    def __enter__(self):
        self._gzip = None
        if self.compression == 'gz':
            # GzipFile directly, to pin the header timestamp and name
            self._gzip = gzip.GzipFile(filename='', mode='wb',
                                       fileobj=self.fileobj,
                                       compresslevel=self.compress_level,
                                       mtime=0)
            self.archive = tarfile.open(fileobj=self._gzip, mode='w')
        elif self.compression == 'bz2':
            self.archive = tarfile.open(fileobj=self.fileobj, mode='w:bz2',
                                        compresslevel=self.compress_level)
        else:
            self.archive = tarfile.open(fileobj=self.fileobj, mode='w')
        return self

    def __exit__(self, *args):
        self.archive.close()
        if self._gzip is not None:
            self._gzip.close()

    def add_bytes(self, sourcebytes, target):
        info = tarfile.TarInfo(target)
        info.size = len(sourcebytes)
        info.mtime = 0
        info.mode = _FILE_MODE
        self.archive.addfile(info, BytesIO(sourcebytes))


class ZipArchive(object):
    def __init__(self, fileobj, compress_level):
        self.fileobj = fileobj
        self.compress_level = compress_level

    def __enter__(self):
        self.archive = zipfile.ZipFile(self.fileobj, "w",
                                       compression=zipfile.ZIP_DEFLATED,
                                       compresslevel=self.compress_level)
        return self

    def __exit__(self, *args):
        self.archive.close()

    def add_bytes(self, sourcebytes, target):
        info = zipfile.ZipInfo(target, date_time=_ZIP_DATE)
        info.compress_type = zipfile.ZIP_DEFLATED
        info.external_attr = _FILE_MODE << 16
        self.archive.writestr(info, sourcebytes,
                              compresslevel=self.compress_level)


def write_bundle(path, members, format='infer', compress_level=4):
    """Write ``(name, bytes)`` members to an archive, sorted by name.

    Parameters
    ----------
    path : str
        Output file.
    members : iterable of (str, bytes)
    format : str, optional
        One of ``FORMATS``, or ``'infer'`` to use the file extension.
    compress_level : int, optional
        0 to 9. Ignored for ``tar``.
    """
    if format == 'infer':
        format = infer_format(path)
        if format is None:
            raise ClutterGraspException("Cannot infer an archive format from %r"
                                        % path)
    members = sorted(members)
    with open(path, 'wb') as f:
        with archive(f, format, compress_level) as arc:
            for name, data in members:
                arc.add_bytes(data, name)
    return path


def read_bundle(path):
    """Read every regular file of a bundle as ``(name, bytes)``, sorted by name.

    Raises
    ------
    ClutterGraspException
        If the file is missing or not a readable archive.
    """
    if not os.path.isfile(path):
        raise ClutterGraspException("Bundle %r does not exist" % path)
    try:
        if zipfile.is_zipfile(path):
            with zipfile.ZipFile(path) as z:
                out = [(name, z.read(name)) for name in z.namelist()
                       if not name.endswith('/')]
        else:
            with tarfile.open(path, 'r:*') as t:
                out = [(m.name, t.extractfile(m).read()) for m in t.getmembers()
                       if m.isfile()]
    except (tarfile.TarError, zipfile.BadZipFile, EOFError, OSError) as e:
        raise ClutterGraspException("Failed to read bundle %r: %s" % (path, e))
    return sorted(out)
