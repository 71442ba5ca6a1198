import json
import subprocess
import sys

import pytest

from polarsecrecy import serialize as io
from polarsecrecy.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main


def run(*argv):
    return main([str(a) for a in argv])


def strip(path):
    d = json.loads(path.read_text())
    d.pop("created", None)
    return d


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy")
    assert run("channel", "make", "--preset", "toy", "--out", d) == EXIT_OK
    assert run("construct", "--channel", d / "channel.json",
               "--seed", 1, "--out", d) == EXIT_OK
    return d


def test_construct_outputs(toy):
    code = io.load_code(toy / "code.json")
    assert (code.K, code.J) == (2, 2)
    assert "K" in (toy / "summary.txt").read_text()
    assert (toy / "profile.csv").read_text().startswith("index")


def test_construct_requires_seed(tmp_path, toy):
    assert run("construct", "--channel", toy / "channel.json", "--out", tmp_path) == EXIT_CONFIG


def test_infeasible_exact_construction(tmp_path, toy):
    assert run("construct", "--channel", toy / "channel.json", "--mode", "exact", "--l", 8,
               "--m", 2, "--eps1", 0.1, "--eps2", 0.1, "--seed", 1, "--out", tmp_path) \
        == EXIT_INFEASIBLE


def test_bad_channel_file(tmp_path):
    (tmp_path / "c.json").write_text('{"kind": "unknown"}')
    assert run("construct", "--channel", tmp_path / "c.json", "--seed", 1, "--l", 4, "--m", 2,
               "--eps1", 0.1, "--eps2", 0.1, "--out", tmp_path) == EXIT_CONFIG


def test_code_channel_mismatch(tmp_path, toy):
    assert run("channel", "make", "--kind", "bsc_cascade", "--p1", 0.1, "--p2", 0.2,
               "--out", tmp_path) == EXIT_OK
    assert run("ska", "--channel", tmp_path / "channel.json", "--code", toy / "code.json",
               "--trials", 5, "--seed", 1, "--out", tmp_path) == EXIT_CONFIG


def test_ska_and_pcc_reruns_are_identical(tmp_path, toy):
    for name in ("ska", "pcc"):
        for sub in ("a", "b"):
            assert run(name, "--channel", toy / "channel.json", "--code", toy / "code.json",
                       "--trials", 30, "--seed", 9, "--out", tmp_path / sub) == EXIT_OK
        for suffix in ("_report.json", "_transcript.json"):
            assert strip(tmp_path / "a" / f"{name}{suffix}") == \
                strip(tmp_path / "b" / f"{name}{suffix}")
        assert (tmp_path / "a" / f"{name}_trials.csv").read_bytes() == \
            (tmp_path / "b" / f"{name}_trials.csv").read_bytes()
        rep = json.loads((tmp_path / "a" / f"{name}_report.json").read_text())
        assert rep["trials"] == 30 and rep["seed"] == 9
        assert rep["code_hash"] == io.code_hash(io.load_code(toy / "code.json"))


def test_secrets_only_on_request(tmp_path, toy):
    run("ska", "--channel", toy / "channel.json", "--code", toy / "code.json",
        "--trials", 2, "--seed", 1, "--out", tmp_path / "plain")
    run("ska", "--channel", toy / "channel.json", "--code", toy / "code.json",
        "--trials", 2, "--seed", 1, "--dump-secrets", "--out", tmp_path / "raw")
    assert "x" not in json.loads((tmp_path / "plain" / "ska_transcript.json").read_text())
    assert "x" in json.loads((tmp_path / "raw" / "ska_transcript.json").read_text())


def test_noiseless_bob(tmp_path):
    table = {"x": 2, "y": 2, "z": 2, "p_x": [0.5, 0.5],
             "w": [[0.8, 0.2, 0.0, 0.0], [0.0, 0.0, 0.2, 0.8]]}
    (tmp_path / "t.json").write_text(json.dumps(table))
    assert run("channel", "make", "--table", tmp_path / "t.json", "--out", tmp_path) == EXIT_OK
    assert run("construct", "--channel", tmp_path / "channel.json", "--mode", "exact",
               "--l", 4, "--m", 2, "--eps1", 0.1, "--eps2", 0.1, "--seed", 1,
               "--out", tmp_path) == EXIT_OK
    assert run("ska", "--channel", tmp_path / "channel.json", "--code", tmp_path / "code.json",
               "--trials", 40, "--seed", 2, "--out", tmp_path) == EXIT_OK
    assert json.loads((tmp_path / "ska_report.json").read_text())["mismatches"] == 0


def test_pcc_with_no_secret_capacity(tmp_path):
    table = {"x": 2, "y": 2, "z": 2, "p_x": [0.5, 0.5],
             "w": [[0.95, 0.0, 0.05, 0.0], [0.0, 0.05, 0.0, 0.95]]}
    (tmp_path / "t.json").write_text(json.dumps(table))
    run("channel", "make", "--table", tmp_path / "t.json", "--out", tmp_path)
    run("construct", "--channel", tmp_path / "channel.json", "--mode", "exact", "--l", 4,
        "--m", 2, "--eps1", 0.1, "--eps2", 0.1, "--seed", 1, "--out", tmp_path)
    assert run("pcc", "--channel", tmp_path / "channel.json", "--code", tmp_path / "code.json",
               "--trials", 5, "--seed", 2, "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "pcc_report.json").read_text())
    assert rep["J"] == 0 and rep["rate"] == 0


def test_pcc_message_file(tmp_path, toy):
    (tmp_path / "m.hex").write_text(io.bits_to_hex([1, 0]))
    assert run("pcc", "--channel", toy / "channel.json", "--code", toy / "code.json",
               "--trials", 3, "--seed", 2, "--message", tmp_path / "m.hex",
               "--out", tmp_path) == EXIT_OK
    t = json.loads((tmp_path / "pcc_transcript.json").read_text())
    assert t["message"] == io.bits_to_hex([1, 0])
    (tmp_path / "m.hex").write_text(io.bits_to_hex([1, 0, 1]))
    assert run("pcc", "--channel", toy / "channel.json", "--code", toy / "code.json",
               "--trials", 3, "--seed", 2, "--message", tmp_path / "m.hex",
               "--out", tmp_path) == EXIT_CONFIG


def test_analyze_commands(tmp_path, toy):
    assert run("analyze", "polarization", "--bec", 0.5, "--ns", "64..1024",
               "--out", tmp_path) == EXIT_OK
    rows = json.loads((tmp_path / "polarization.json").read_text())["rows"]
    assert [r["N"] for r in rows] == [64, 128, 256, 512, 1024]
    assert run("analyze", "secrecy", "--channel", toy / "channel.json", "--code",
               toy / "code.json", "--out", tmp_path) == EXIT_OK
    sec = json.loads((tmp_path / "secrecy.json").read_text())
    assert sec["bound_dominates"]
    assert run("analyze", "supersource", "--channel", toy / "channel.json", "--l", 4,
               "--eps1", 0.1, "--out", tmp_path) == EXIT_OK


def test_report_writes_pngs(tmp_path, toy):
    run("ska", "--channel", toy / "channel.json", "--code", toy / "code.json",
        "--trials", 10, "--seed", 1, "--out", toy)
    assert run("report", "--in", toy, "--out", tmp_path) == EXIT_OK
    for name in ("profiles.png", "outer_sets.png", "mismatch.png", "report.csv"):
        assert (tmp_path / name).stat().st_size > 0
    assert (tmp_path / "profiles.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "polarsecrecy.cli", "--help"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "construct" in r.stdout
