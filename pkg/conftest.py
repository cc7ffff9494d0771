def pytest_configure(config):
    config.addinivalue_line(
        'markers', 'slow: full scenario runs that take minutes (deselect with -m "not slow")'
    )
