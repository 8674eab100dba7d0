"""
Validation of FE scenario files.
"""
from rest_framework import serializers

from config.exceptions import ConfigurationError
from .solver import BoundaryCondition, InitialVelocity, NodalLoad, SimConfig

COMPONENT_CHOICES = ['x', 'y', 'z']


class BoundaryConditionSerializer(serializers.Serializer):
    node_set = serializers.CharField()
    component = serializers.ChoiceField(choices=COMPONENT_CHOICES)
    kind = serializers.ChoiceField(choices=['displacement', 'velocity'], default='displacement')
    value = serializers.FloatField(default=0.0, help_text='mm or mm/s')
    ramp_time = serializers.FloatField(required=False, min_value=0.0)

    def validate_ramp_time(self, value):
        if value == 0.0:
            raise serializers.ValidationError('ramp_time must be positive.')
        return value


class NodalLoadSerializer(serializers.Serializer):
    node_set = serializers.CharField()
    component = serializers.ChoiceField(choices=COMPONENT_CHOICES)
    value = serializers.FloatField(help_text='N per node')


class InitialVelocitySerializer(serializers.Serializer):
    node_set = serializers.CharField(default='all')
    vector = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3)


class ScenarioSerializer(serializers.Serializer):
    """Time stepping, boundary conditions and materials of one FE run."""
    dt = serializers.FloatField(help_text='s')
    t_end = serializers.FloatField(min_value=0.0, help_text='s')
    boundary_conditions = BoundaryConditionSerializer(many=True, default=list)
    loads = NodalLoadSerializer(many=True, default=list)
    initial_velocity = InitialVelocitySerializer(many=True, default=list)
    output_every = serializers.IntegerField(min_value=1, default=1)
    snapshot_every = serializers.IntegerField(min_value=0, default=0)
    allow_dt_override = serializers.BooleanField(default=False)
    materials = serializers.DictField(required=False, help_text='Fiber and matrix blocks or a preset')

    def validate_dt(self, value):
        if value <= 0:
            raise serializers.ValidationError('dt must be positive.')
        return value

    def to_config(self) -> SimConfig:
        data = self.validated_data
        return SimConfig(
            dt=data['dt'],
            t_end=data['t_end'],
            boundary_conditions=[BoundaryCondition(**bc) for bc in data['boundary_conditions']],
            loads=[NodalLoad(**load) for load in data['loads']],
            initial_velocity=[InitialVelocity(iv['node_set'], tuple(iv['vector'])) for iv in data['initial_velocity']],
            output_every=data['output_every'],
            snapshot_every=data['snapshot_every'],
            allow_dt_override=data['allow_dt_override'],
        )


def parse_scenario(payload: dict) -> ScenarioSerializer:
    serializer = ScenarioSerializer(data=payload)
    if not serializer.is_valid():
        raise ConfigurationError(f'invalid scenario: {serializer.errors}')
    return serializer
