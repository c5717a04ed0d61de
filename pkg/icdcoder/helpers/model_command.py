from icdcoder import params
from icdcoder.helpers import seeded_command

FAMILIES = ('bow', 'lstm', 'transformer')


class ModelCommandOptions(seeded_command.SeededCommandOptions):

    def __init__(self, meta, *args, **kwargs):
        super(ModelCommandOptions, self).__init__(meta=meta, *args, **kwargs)
        self.families = tuple(getattr(meta, 'families', FAMILIES))

    def post_process(self):
        param = params.ChoiceParam(
            choices=self.families, named=True, default=self.families[0],
            help='Model family: %s.' % ', '.join(self.families))
        # Replaces an inherited --family so Meta.families narrows the choices.
        param.name = 'family'
        self.named_params['family'] = param
        super(ModelCommandOptions, self).post_process()


class ModelCommandMetaclass(seeded_command.SeededCommandMetaclass):
    options_class = ModelCommandOptions


class ModelCommand(seeded_command.SeededCommand,
                   metaclass=ModelCommandMetaclass):
    """
    A seeded command that works on one model family, chosen with
    ``--family``.
    """

    def run(self, data, seed):
        handler = getattr(self, 'run_%s' % data['family'])
        return handler(data, seed)
