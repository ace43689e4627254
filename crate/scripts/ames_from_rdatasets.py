"""Rebuild data/ames.csv from the `rdatasets` wheel (openintro::ames).

The openintro copy of the De Cock Ames data stores R NA for the "None"
masonry veneer level; rows with a recorded veneer area are mapped back to
"None" so that only genuinely blank MasVnrType cells stay missing.

    pip download --no-deps rdatasets -d /tmp/rd
    python3 scripts/ames_from_rdatasets.py /tmp/rd/rdatasets-*.whl data/ames.csv
"""
import io
import lzma
import sys
import zipfile

import pandas as pd

RENAME = {
    "Order": "Id", "area": "GrLivArea", "price": "SalePrice",
    "MS.SubClass": "MSSubClass", "MS.Zoning": "MSZoning", "Lot.Frontage": "LotFrontage",
    "Lot.Area": "LotArea", "Lot.Shape": "LotShape", "Land.Contour": "LandContour",
    "Lot.Config": "LotConfig", "Land.Slope": "LandSlope", "Condition.1": "Condition1",
    "Condition.2": "Condition2", "Bldg.Type": "BldgType", "House.Style": "HouseStyle",
    "Overall.Qual": "OverallQual", "Overall.Cond": "OverallCond", "Year.Built": "YearBuilt",
    "Year.Remod.Add": "YearRemodAdd", "Roof.Style": "RoofStyle", "Roof.Matl": "RoofMatl",
    "Exterior.1st": "Exterior1st", "Exterior.2nd": "Exterior2nd", "Mas.Vnr.Type": "MasVnrType",
    "Mas.Vnr.Area": "MasVnrArea", "Exter.Qual": "ExterQual", "Exter.Cond": "ExterCond",
    "Bsmt.Qual": "BsmtQual", "Bsmt.Cond": "BsmtCond", "Bsmt.Exposure": "BsmtExposure",
    "BsmtFin.Type.1": "BsmtFinType1", "BsmtFin.SF.1": "BsmtFinSF1",
    "BsmtFin.Type.2": "BsmtFinType2", "BsmtFin.SF.2": "BsmtFinSF2", "Bsmt.Unf.SF": "BsmtUnfSF",
    "Total.Bsmt.SF": "TotalBsmtSF", "Heating.QC": "HeatingQC", "Central.Air": "CentralAir",
    "X1st.Flr.SF": "1stFlrSF", "X2nd.Flr.SF": "2ndFlrSF", "Low.Qual.Fin.SF": "LowQualFinSF",
    "Bsmt.Full.Bath": "BsmtFullBath", "Bsmt.Half.Bath": "BsmtHalfBath", "Full.Bath": "FullBath",
    "Half.Bath": "HalfBath", "Bedroom.AbvGr": "BedroomAbvGr", "Kitchen.AbvGr": "KitchenAbvGr",
    "Kitchen.Qual": "KitchenQual", "TotRms.AbvGrd": "TotRmsAbvGrd", "Fireplace.Qu": "FireplaceQu",
    "Garage.Type": "GarageType", "Garage.Yr.Blt": "GarageYrBlt", "Garage.Finish": "GarageFinish",
    "Garage.Cars": "GarageCars", "Garage.Area": "GarageArea", "Garage.Qual": "GarageQual",
    "Garage.Cond": "GarageCond", "Paved.Drive": "PavedDrive", "Wood.Deck.SF": "WoodDeckSF",
    "Open.Porch.SF": "OpenPorchSF", "Enclosed.Porch": "EnclosedPorch", "X3Ssn.Porch": "3SsnPorch",
    "Screen.Porch": "ScreenPorch", "Pool.Area": "PoolArea", "Pool.QC": "PoolQC",
    "Misc.Feature": "MiscFeature", "Misc.Val": "MiscVal", "Mo.Sold": "MoSold", "Yr.Sold": "YrSold",
    "Sale.Type": "SaleType", "Sale.Condition": "SaleCondition",
}

ORDER = [
    "Id", "MSSubClass", "MSZoning", "LotFrontage", "LotArea", "Street", "Alley", "LotShape",
    "LandContour", "Utilities", "LotConfig", "LandSlope", "Neighborhood", "Condition1",
    "Condition2", "BldgType", "HouseStyle", "OverallQual", "OverallCond", "YearBuilt",
    "YearRemodAdd", "RoofStyle", "RoofMatl", "Exterior1st", "Exterior2nd", "MasVnrType",
    "MasVnrArea", "ExterQual", "ExterCond", "Foundation", "BsmtQual", "BsmtCond",
    "BsmtExposure", "BsmtFinType1", "BsmtFinSF1", "BsmtFinType2", "BsmtFinSF2", "BsmtUnfSF",
    "TotalBsmtSF", "Heating", "HeatingQC", "CentralAir", "Electrical", "1stFlrSF", "2ndFlrSF",
    "LowQualFinSF", "GrLivArea", "BsmtFullBath", "BsmtHalfBath", "FullBath", "HalfBath",
    "BedroomAbvGr", "KitchenAbvGr", "KitchenQual", "TotRmsAbvGrd", "Functional", "Fireplaces",
    "FireplaceQu", "GarageType", "GarageYrBlt", "GarageFinish", "GarageCars", "GarageArea",
    "GarageQual", "GarageCond", "PavedDrive", "WoodDeckSF", "OpenPorchSF", "EnclosedPorch",
    "3SsnPorch", "ScreenPorch", "PoolArea", "PoolQC", "Fence", "MiscFeature", "MiscVal",
    "MoSold", "YrSold", "SaleType", "SaleCondition", "SalePrice",
]


def main(wheel, out):
    raw = zipfile.ZipFile(wheel).read("rdatasets/_data/openintro/ames.pkl.compress")
    df = pd.read_pickle(io.BytesIO(lzma.decompress(raw))).rename(columns=RENAME)
    none_veneer = df["MasVnrType"].isna() & df["MasVnrArea"].notna()
    df.loc[none_veneer, "MasVnrType"] = "None"
    for col in df.columns:
        if df[col].dtype == object:
            df[col] = df[col].str.strip()
        elif df[col].dtype.kind == "f" and (df[col].dropna() % 1 == 0).all():
            df[col] = df[col].astype("Int64")
    df[ORDER].to_csv(out, index=False, na_rep="")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
