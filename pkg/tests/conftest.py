from hypothesis import HealthCheck, settings

# compiled kernels make the first example of a test slow; deadlines would flake
settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria: dict[int, list[tuple[str, bool]]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            item.user_properties.append(("criterion", marker.args[0]))


def pytest_runtest_logreport(report):
    # a test counts once: its call phase, or its setup if that already failed
    if report.when != "call" and not (report.when == "setup" and not report.passed):
        return
    for key, n in report.user_properties:
        if key == "criterion":
            _criteria.setdefault(n, []).append((report.nodeid.split("::")[-1], report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        failed = [name for name, passed in _criteria[n] if not passed]
        line = f"criterion {n:2d}: {'FAIL' if failed else 'PASS'}"
        if failed:
            line += f"  ({', '.join(failed)})"
        terminalreporter.write_line(line)
