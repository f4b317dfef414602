class HdcceError(Exception):
    pass


class ConfigError(HdcceError, ValueError):
    pass


class DataError(HdcceError, ValueError):
    pass


class NumericError(HdcceError, RuntimeError):
    pass
