from __future__ import absolute_import, division

import itertools
import json
import logging
import os
import socketserver
import sys

import numpy as np

from ._version import __version__
from .core import ClutterGraspException, ValidationError, get_config
from .skills import SKILL_NAMES, SkillRequest, execute, tool_manifest
from .world import scene_snapshot


__all__ = ('Session', 'handle_message', 'serve', 'make_tcp_server',
           'PARSE_ERROR', 'INVALID_REQUEST', 'METHOD_NOT_FOUND',
           'INVALID_PARAMS', 'INTERNAL_ERROR')


logger = logging.getLogger(__name__)

PROTOCOL_VERSION = '2024-11-05'
SERVER_NAME = 'clutter-grasp'

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603


class Session(object):
    """One client connection bound to one scene.

    Parameters
    ----------
    scene : SceneState
        The scene the session starts from.
    config : AttrDict, optional
    snapshot_path : str, optional
        Where the final scene is written when the session closes.
    """
    def __init__(self, scene, config=None, snapshot_path=None):
        self.scene = scene
        self.config = get_config(config)
        self.snapshot_path = snapshot_path
        self.last_id = None
        self.calls = 0
        self.closed = False

    def __repr__(self):
        return 'Session<calls=%d, last_id=%r>' % (self.calls, self.last_id)

    def handle(self, data):
        return handle_message(self, data)

    def close(self):
        """Persist the final scene snapshot. Safe to call more than once."""
        if self.closed:
            return
        self.closed = True
        if self.snapshot_path is None:
            return
        with open(self.snapshot_path, 'w') as f:
            json.dump(scene_snapshot(self.scene), f, indent=2, sort_keys=True,
                      default=_to_builtin)
            f.write('\n')
        logger.info("Wrote scene snapshot to %s", self.snapshot_path)


class RPCError(Exception):
    def __init__(self, code, message):
        super(RPCError, self).__init__(message)
        self.code = code
        self.message = message


def _to_builtin(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError("%r is not JSON serializable" % (obj,))


def _encode(response):
    return (json.dumps(response, separators=(",", ":"), default=_to_builtin)
            + "\n").encode('utf-8')


def _error(id, code, message):
    return _encode({'jsonrpc': '2.0', 'id': id,
                    'error': {'code': code, 'message': message}})


def _initialize(session, params):
    return {'protocolVersion': PROTOCOL_VERSION,
            'capabilities': {'tools': {'listChanged': False}},
            'serverInfo': {'name': SERVER_NAME, 'version': __version__}}


def _tools_list(session, params):
    return {'tools': tool_manifest(session.config)}


def _tools_call(session, params):
    name = params.get('name')
    if name not in SKILL_NAMES:
        raise RPCError(METHOD_NOT_FOUND, "Unknown tool %r" % (name,))
    args = params.get('arguments')
    if args is None:
        args = {}
    try:
        request = SkillRequest(name, args, session.config)
    except ValidationError as e:
        raise RPCError(INVALID_PARAMS, str(e))
    scene, result, outcome = execute(session.scene, request, session.config,
                                     seed=session.calls)
    session.scene = scene
    session.calls += 1
    logger.debug("tools/call %s %r -> %s %s", name, args, result.success,
                 result.message)
    payload = result.to_dict()
    if outcome is not None:
        payload['grasp'] = outcome.to_dict()
    return payload


_METHODS = {'initialize': _initialize,
            'tools/list': _tools_list,
            'tools/call': _tools_call}


def handle_message(session, data):
    """Answer one protocol message.

    Parameters
    ----------
    session : Session
    data : bytes or str
        One JSON-RPC request, without its trailing newline.

    Returns
    -------
    response : bytes
        One UTF-8 JSON document terminated by a newline. Requests with an
        integer id larger than every earlier id of the session are answered
        with ``result`` or ``error``; anything else gets an error with
        ``id`` null or the offending id.
    """
    try:
        if isinstance(data, bytes):
            data = data.decode('utf-8')
        msg = json.loads(data)
    except (UnicodeDecodeError, ValueError, RecursionError) as e:
        return _error(None, PARSE_ERROR, "Parse error: %s" % e)
    if not isinstance(msg, dict):
        return _error(None, INVALID_REQUEST, "Request must be a JSON object")

    id = msg.get('id')
    if not isinstance(id, int) or isinstance(id, bool):
        return _error(None, INVALID_REQUEST, "Request id must be an integer")
    if session.last_id is not None and id <= session.last_id:
        return _error(id, INVALID_REQUEST,
                      "Request id %d does not follow %d" % (id, session.last_id))
    session.last_id = id

    method = msg.get('method')
    if method not in _METHODS:
        return _error(id, METHOD_NOT_FOUND, "Unknown method %r" % (method,))
    params = msg.get('params')
    if params is None:
        params = {}
    if not isinstance(params, dict):
        return _error(id, INVALID_PARAMS, "params must be an object")

    try:
        result = _METHODS[method](session, params)
    except RPCError as e:
        return _error(id, e.code, e.message)
    except ClutterGraspException as e:
        return _error(id, INVALID_PARAMS, str(e))
    except Exception as e:
        logger.exception("Internal error handling %r", method)
        return _error(id, INTERNAL_ERROR, "Internal error: %s" % e)
    return _encode({'jsonrpc': '2.0', 'id': id, 'result': result})


def _run_stream(session, lines, write):
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        write(session.handle(line))


def _session_path(snapshot, number):
    if snapshot is None:
        return None
    base, ext = os.path.splitext(snapshot)
    return '%s.%d%s' % (base, number, ext)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server = self.server
        number = next(server.counter)
        session = Session(server.scene_factory(), server.config,
                          _session_path(server.snapshot, number))
        logger.info("Session %d opened from %s", number, self.client_address)
        try:
            _run_stream(session, self.rfile, self._write)
        except (OSError, ValueError) as e:
            logger.warning("Session %d transport failure: %s", number, e)
        finally:
            session.close()
            logger.info("Session %d closed after %d calls", number,
                        session.calls)

    def _write(self, data):
        self.wfile.write(data)
        self.wfile.flush()


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


def make_tcp_server(scene_factory, host='127.0.0.1', port=0, snapshot=None,
                    config=None):
    """Create a threaded TCP server with one session per connection.

    Parameters
    ----------
    scene_factory : callable
        Returns a fresh SceneState for every new connection.
    host, port : str, int, optional
        Address to bind; port 0 picks a free port.
    snapshot : str, optional
        Snapshot path template; session ``n`` writes ``<stem>.<n><ext>``.
    config : AttrDict, optional

    Returns
    -------
    server : socketserver.ThreadingTCPServer
        Call ``serve_forever()`` to run it.
    """
    server = _TCPServer((host, port), _Handler)
    server.scene_factory = scene_factory
    server.snapshot = snapshot
    server.config = get_config(config)
    server.counter = itertools.count(1)
    return server


def serve(scene_factory, transport='stdio', host='127.0.0.1', port=0,
          snapshot=None, config=None, stdin=None, stdout=None):
    """Run the tool server until its input ends or it is interrupted.

    Parameters
    ----------
    scene_factory : callable
        Returns the SceneState a new session starts from.
    transport : {'stdio', 'tcp'}, optional
    host, port : str, int, optional
        TCP address.
    snapshot : str, optional
        Path of the final scene snapshot. For TCP the session number is
        inserted before the extension.
    config : AttrDict, optional
    stdin, stdout : binary file objects, optional
        Streams of the stdio transport. Default to the process streams.
    """
    config = get_config(config)
    if transport == 'stdio':
        stdin = stdin if stdin is not None else sys.stdin.buffer
        stdout = stdout if stdout is not None else sys.stdout.buffer

        def write(data):
            stdout.write(data)
            stdout.flush()

        session = Session(scene_factory(), config, snapshot)
        logger.info("Tool server listening on stdio")
        try:
            _run_stream(session, stdin, write)
        except (OSError, ValueError) as e:
            logger.warning("Transport failure: %s", e)
        finally:
            session.close()
    elif transport == 'tcp':
        server = make_tcp_server(scene_factory, host, port, snapshot, config)
        logger.info("Tool server listening on %s:%d", *server.server_address[:2])
        try:
            server.serve_forever()
        finally:
            server.server_close()
    else:
        raise ValidationError("Unknown transport %r, expected 'stdio' or 'tcp'"
                              % (transport,))
