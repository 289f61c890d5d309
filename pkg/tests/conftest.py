"""Print the acceptance verdicts as one block at the end of the run."""


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call" or "test_acceptance" not in rep.nodeid:
                continue
            found = [v for k, v in rep.user_properties if k == "acceptance"]
            if found:
                lines.extend(found)
            elif key == "failed":
                lines.append(f"FAIL  {rep.nodeid.split('::')[-1]}  (raised before a verdict)")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=_order):
            terminalreporter.write_line(line)


def _order(line):
    parts = line.split()
    try:
        return int(parts[2].rstrip(":"))
    except (IndexError, ValueError):
        return 99
