import factory
from django.utils import timezone

from .models import RunManifest


class RunManifestFactory(factory.django.DjangoModelFactory):
    class Meta:
        model = RunManifest

    command = 'train'
    config_hash = factory.Sequence(lambda n: f'{n:064x}')
    options = factory.LazyAttribute(lambda o: {'epochs': 10, 'threads': 1})
    input_hashes = factory.Dict({})
    seeds = factory.Dict({'seed': 0})
    outputs = factory.List([])
    exit_status = 0
    wall_time = 1.5
    started_at = factory.LazyFunction(timezone.now)
    finished_at = factory.LazyFunction(timezone.now)
