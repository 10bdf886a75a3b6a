__version__ = '0.1.0'


class ProxyboundsError(Exception):

    exit_code = 3
    cell = None
    diagnostics = None
    ex = None

    def __init__(self, *args, **kwargs):
        super(ProxyboundsError, self).__init__(*args)
        if kwargs.get('cell') is not None:
            self.cell = kwargs['cell']
        if kwargs.get('diagnostics'):
            self.diagnostics = list(kwargs['diagnostics'])
        if kwargs.get('original_exception'):
            self.ex = kwargs['original_exception']
