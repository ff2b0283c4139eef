import neuraCrypt.logger  # noqa
