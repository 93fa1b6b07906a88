pub mod mock_scorer;
