import json

from ddmapd.cli import EXIT_INPUT, EXIT_OK, EXIT_SOLVER, EXIT_VIOLATIONS, main


def test_generate_solve_validate_round_trip(tmp_path, capsys):
    inst = tmp_path / "fig.json"
    assert main(["generate", "--kind", "example", "--out", str(inst)]) == EXIT_OK
    log = tmp_path / "fig.log.json"
    assert main(["solve", "--algo", "ivf", "--k", "8", "--subopt", "1.2", str(inst), "--out", str(log)]) == EXIT_OK
    line = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert line["valid"] and line["algo"] == "ivf"
    assert main(["validate", str(log)]) == EXIT_OK
    assert main(["validate", str(log), "--instance", str(inst)]) == EXIT_OK
    assert main(["render", str(log), "--out", str(tmp_path / "frames")]) == EXIT_OK
    assert len(list((tmp_path / "frames").glob("frame_*.svg"))) == line["makespan"] + 1


def test_corrupted_log_exits_with_violations(tmp_path, capsys):
    inst = tmp_path / "fig.json"
    main(["generate", "--kind", "example", "--out", str(inst)])
    log = tmp_path / "fig.log.json"
    main(["solve", str(inst), "--out", str(log)])
    data = json.loads(log.read_text())
    # teleport the first agent
    path = data["agents"][0]["path"]
    path[1] = [2, 0] if path[1] != [2, 0] else [0, 0]
    log.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["validate", str(log)]) == EXIT_VIOLATIONS
    assert "violation" in capsys.readouterr().out


def test_bad_input_exit_codes(tmp_path):
    assert main(["solve", str(tmp_path / "missing.json")]) == EXIT_INPUT
    assert main(["solve", "--subopt", "0.5", "x.json"]) == EXIT_INPUT
    assert main(["nonsense"]) == EXIT_INPUT
    assert main(["validate", str(tmp_path / "missing.log.json")]) == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", str(bad)]) == EXIT_INPUT


def test_solver_failure_exit_code(tmp_path):
    # two shelves that must swap along a corridor: no trajectories exist
    (tmp_path / "c.map").write_text("type octile\nheight 1\nwidth 3\nmap\n...\n")
    inst = {"map": "c.map", "agents": [[0, 1]], "shelves": [{"pickup": [0, 0], "delivery": [0, 2]},
                                                 {"pickup": [0, 2], "delivery": [0, 0]}]}
    (tmp_path / "c.json").write_text(json.dumps(inst))
    assert main(["solve", str(tmp_path / "c.json"), "--timeout", "2"]) == EXIT_SOLVER


def test_bench_csv(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", "--sizes", "8", "--den", "40", "--n", "4", "--algos", "ivf", "--reps", "2",
                 "--summary", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("8,0.4,")
    assert main(["bench", "--algos", "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 1
