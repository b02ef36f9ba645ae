import io
import socket
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmsearch.core import ScanBounds, travel
from pmsearch.oracle import DirectivityModel
from pmsearch.rig import (
    Acquire,
    ErrorReply,
    RigClient,
    RigError,
    RigOracle,
    RigServer,
    RigState,
    Rotate,
    Rotated,
    Sample,
    Status,
    StatusReply,
    decode_command,
    decode_reply,
    encode,
    serve_stream,
    snap,
)
from pmsearch.search import Algorithm, GssMode, SearchSpec, run_search

DATA = Path(__file__).parent / "data"

finite = st.floats(allow_nan=False, allow_infinity=False)
text = st.text(max_size=40)
commands = st.one_of(st.builds(Rotate, finite), st.just(Acquire()), st.just(Status()))
replies = st.one_of(
    st.builds(Rotated, finite, finite),
    st.builds(Sample, finite, finite, finite),
    st.builds(StatusReply, finite, finite),
    st.builds(ErrorReply, text, text),
)


@given(commands)
def test_command_round_trip(msg):
    line = encode(msg)
    assert "\n" not in line
    assert decode_command(line) == msg
    assert encode(decode_command(line)) == line


@given(replies)
def test_reply_round_trip(msg):
    line = encode(msg)
    assert "\n" not in line
    assert encode(decode_reply(line)) == line


def test_conformance_valid_corpus():
    for line in (DATA / "protocol_valid.txt").read_text(encoding="utf-8").splitlines():
        try:
            msg = decode_command(line)
        except Exception:
            msg = decode_reply(line)
        assert encode(msg) == line


def test_conformance_invalid_corpus():
    state = RigState(DirectivityModel(), acquisition_delay=0.0)
    for entry in (DATA / "protocol_invalid.txt").read_text(encoding="utf-8").splitlines():
        code, line = entry.split("\t", 1)
        reply = decode_reply(state.handle_line(line))
        assert isinstance(reply, ErrorReply), line
        assert reply.code == code, line
    assert state.current_angle == 0.0 and state.elapsed == 0.0


def test_integers_accepted_but_canonicalized():
    assert decode_command('{"cmd": "rotate", "target_deg": 10}') == Rotate(10.0)
    assert encode(Rotate(10)) == '{"cmd":"rotate","target_deg":10.0}'


@pytest.mark.parametrize(
    "angle, quantum, expected",
    [(10.3, 0.5, 10.5), (10.25, 0.5, 10.5), (-10.25, 0.5, -10.5), (10.2, 0.5, 10.0), (3.3, 0.0, 3.3), (0.1, 0.5, 0.0)],
)
def test_snap(angle, quantum, expected):
    assert snap(angle, quantum) == expected


def test_rotate_timing():
    state = RigState(DirectivityModel(), rotation_speed=20.0)
    assert state.rotate(10.0) == Rotated(10.0, 0.5)


def test_rotate_quantized():
    state = RigState(DirectivityModel(), quantization=0.5)
    assert state.rotate(10.3).angle_deg == 10.5
    assert state.rotate(34.9).angle_deg == 35.0


def test_quantized_snap_stays_in_bounds():
    state = RigState(DirectivityModel(), bounds=ScanBounds(-35.0, 35.0), quantization=0.3)
    assert state.rotate(35.0).angle_deg <= 35.0


def test_acquire_delay():
    state = RigState(DirectivityModel(peak=0.0), acquisition_delay=10.0)
    reply = state.acquire()
    assert reply == Sample(0.0, 1.0, 10.0)
    assert state.elapsed == 10.0


def test_out_of_bounds_leaves_angle():
    state = RigState(DirectivityModel())
    state.rotate(5.0)
    reply = decode_reply(state.handle_line(encode(Rotate(40.0))))
    assert isinstance(reply, ErrorReply) and reply.code == "out_of_bounds"
    assert state.current_angle == 5.0


def test_elapsed_monotone_and_exact():
    state = RigState(DirectivityModel(), rotation_speed=7.0, acquisition_delay=0.3)
    log, last = [0.0], 0.0
    for target in [-8.26, 8.26, -18.4, -3.1, -8.26, 30.0, 12.0]:
        state.handle(Rotate(target))
        state.handle(Acquire())
        log.append(target)
        elapsed = state.handle(Status()).seconds
        assert elapsed >= last
        last = elapsed
    assert last == travel(log) / 7.0 + 7 * 0.3


def test_stdio_transport():
    state = RigState(DirectivityModel(peak=2.0), acquisition_delay=0.0)
    infile = io.StringIO('{"cmd":"rotate","target_deg":2.0}\n\n{"cmd":"acquire"}\nbogus\n{"cmd":"status"}\n')
    out = io.StringIO()
    serve_stream(state, infile, out)
    lines = out.getvalue().splitlines()
    assert lines == [
        '{"cmd":"rotated","angle_deg":2.0,"seconds":0.06666666666666667}',
        '{"cmd":"sample","angle_deg":2.0,"intensity":1.0,"seconds":0.0}',
        lines[2],
        '{"cmd":"status","angle_deg":2.0,"seconds":0.06666666666666667}',
    ]
    assert decode_reply(lines[2]).code == "malformed"


@pytest.fixture
def rig_server():
    servers = []

    def start(state):
        server = RigServer(state)
        server.start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()


def test_tcp_session_and_busy(rig_server):
    server = rig_server(RigState(DirectivityModel(peak=5.0), acquisition_delay=0.0))
    host, port = server.address
    with RigClient(host, port) as client:
        assert client.rotate(5.0).angle_deg == 5.0
        assert client.acquire().intensity == 1.0
        with RigClient(host, port) as intruder:
            with pytest.raises(RigError) as exc:
                intruder.status()
            assert exc.value.code == "busy"
        assert client.status().angle_deg == 5.0
    # the session is released once the first client disconnects
    with RigClient(host, port) as again:
        assert again.status().angle_deg == 5.0


def test_rig_oracle_matches_direct_model(rig_server):
    server = rig_server(RigState(DirectivityModel(peak=5.0), acquisition_delay=0.0))
    spec = SearchSpec(budget=20, gss_mode=GssMode.PAIRED_FRESH)
    with RigClient(*server.address) as client:
        via_rig = run_search(RigOracle(client), spec)
    direct = run_search(DirectivityModel(peak=5.0), spec)
    assert via_rig.trace == direct.trace
    assert via_rig.estimate == direct.estimate


def test_rig_oracle_records_quantized_angles(rig_server):
    server = rig_server(RigState(DirectivityModel(peak=5.0), quantization=0.5, acquisition_delay=0.0))
    with RigClient(*server.address) as client:
        out = run_search(RigOracle(client), SearchSpec(algorithm=Algorithm.TERNARY, budget=16))
    assert all((s.angle / 0.5).is_integer() for s in out.trace)


def test_rig_error_propagates(rig_server):
    server = rig_server(RigState(DirectivityModel(), bounds=ScanBounds(-10.0, 10.0)))
    with RigClient(*server.address) as client:
        with pytest.raises(RigError) as exc:
            RigOracle(client).acquire(20.0)
    assert exc.value.code == "out_of_bounds"


def test_disconnected():
    from pmsearch.rig import Disconnected

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    with pytest.raises(Disconnected):
        RigClient("127.0.0.1", port, timeout=1.0)
